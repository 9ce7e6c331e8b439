// SPDX-License-Identifier: Apache-2.0

//! Boolean functions of library cells: expressions, truth tables, functional
//! similarity and inverting relationships between cell types.

mod expr;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::liberty::Library;

pub use expr::{BoolExpr, CompiledExpr};

/// Largest input count enumerated into a truth table by default.
pub const DEFAULT_INPUT_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoolFnError {
    #[error("cannot parse '{text}' at {position}: expected {expected}")]
    Parse { text: String, position: usize, expected: String },
    #[error("pin '{0}' is not assigned")]
    MissingPin(String),
    #[error("cell type '{0}' has more than one output pin")]
    MultiOutput(String),
    #[error("{n} inputs exceed the truth-table limit of {limit}")]
    TooManyInputs { n: usize, limit: usize },
    #[error("input pins differ: {a:?} vs {b:?}")]
    PinMismatch { a: Vec<String>, b: Vec<String> },
    #[error("unknown cell type '{0}'")]
    UnknownType(String),
    #[error("cell type '{ty}' has no usable function: {reason}")]
    NoFunction { ty: String, reason: String },
}

/// Output column over all input assignments. Assignment `i` gives pin `k`
/// the value of bit `n-1-k` of `i` (the first pin is the most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TruthTable {
    pub input_pins: Vec<String>,
    pub bits: Vec<bool>,
}

impl TruthTable {
    /// Enumerates `expr` over `pins` sorted lexicographically.
    pub fn from_expr(expr: &BoolExpr, pins: &[String], limit: usize) -> Result<Self, BoolFnError> {
        let mut input_pins = pins.to_vec();
        input_pins.sort();
        input_pins.dedup();
        let n = input_pins.len();
        if n > limit {
            return Err(BoolFnError::TooManyInputs { n, limit });
        }
        let compiled = expr.compile(&input_pins)?;
        let bits = (0..1usize << n).map(|i| compiled.eval_bits(&assignment_bits(i, n))).collect();
        Ok(Self { input_pins, bits })
    }

    pub fn arity(&self) -> usize {
        self.input_pins.len()
    }

    /// The `i`-th input assignment as (pin, value) pairs.
    pub fn assignment(&self, i: usize) -> Vec<(String, bool)> {
        let n = self.arity();
        self.input_pins.iter().cloned().zip(assignment_bits(i, n)).collect()
    }

    pub fn as_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Values of `n` pins for assignment index `i`, most significant first.
pub fn assignment_bits(i: usize, n: usize) -> Vec<bool> {
    (0..n).map(|k| (i >> (n - 1 - k)) & 1 == 1).collect()
}

/// Fraction of assignments on which the two tables agree.
pub fn fun_sim(a: &TruthTable, b: &TruthTable) -> Result<f64, BoolFnError> {
    if a.input_pins != b.input_pins {
        return Err(BoolFnError::PinMismatch { a: a.input_pins.clone(), b: b.input_pins.clone() });
    }
    let matches = a.bits.iter().zip(&b.bits).filter(|(x, y)| x == y).count();
    Ok(matches as f64 / a.bits.len() as f64)
}

/// Number of agreeing assignments; exact counterpart of [`fun_sim`].
pub fn agreement_count(a: &TruthTable, b: &TruthTable) -> Result<usize, BoolFnError> {
    if a.input_pins != b.input_pins {
        return Err(BoolFnError::PinMismatch { a: a.input_pins.clone(), b: b.input_pins.clone() });
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x == y).count())
}

/// Complementary on every assignment.
pub fn is_inverting(a: &TruthTable, b: &TruthTable) -> Result<bool, BoolFnError> {
    Ok(agreement_count(a, b)? == 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Exclusion {
    Sequential,
    MultiOutput,
    NoFunction,
    TooManyInputs(usize),
    /// Member cells disagree on pins or function.
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellTypeInfo {
    pub name: String,
    pub cells: Vec<String>,
    /// Sorted input pin names.
    pub input_pins: Vec<String>,
    pub output_pins: Vec<String>,
    pub truth_table: Option<TruthTable>,
    pub exclusion: Option<Exclusion>,
}

/// Function data for every cell type in a library.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionCatalog {
    pub types: BTreeMap<String, CellTypeInfo>,
    pub warnings: Vec<String>,
}

impl FunctionCatalog {
    pub fn build(lib: &Library) -> Self {
        Self::build_with_limit(lib, DEFAULT_INPUT_LIMIT)
    }

    pub fn build_with_limit(lib: &Library, limit: usize) -> Self {
        let mut types = BTreeMap::new();
        let mut warnings = Vec::new();
        for (ty, members) in lib.cell_types() {
            let first = &lib.cells[&members[0]];
            let mut input_pins = first.input_pins.clone();
            input_pins.sort();
            let output_pins: Vec<String> = first.output_pins.iter().map(|p| p.name.clone()).collect();
            let mut info = CellTypeInfo {
                name: ty.clone(),
                cells: members.clone(),
                input_pins,
                output_pins,
                truth_table: None,
                exclusion: None,
            };
            let mut tables = Vec::new();
            for m in &members {
                let cell = &lib.cells[m];
                let exclusion = if cell.is_sequential {
                    Some(Exclusion::Sequential)
                } else if cell.output_pins.len() != 1 {
                    Some(Exclusion::MultiOutput)
                } else if cell.input_pins.len() > limit {
                    Some(Exclusion::TooManyInputs(cell.input_pins.len()))
                } else {
                    match cell.single_output_function() {
                        None => Some(Exclusion::NoFunction),
                        Some(f) => match TruthTable::from_expr(f, &cell.input_pins, limit) {
                            Ok(t) => {
                                tables.push(t);
                                None
                            }
                            Err(_) => Some(Exclusion::NoFunction),
                        },
                    }
                };
                if let Some(e) = exclusion {
                    info.exclusion = Some(e);
                    break;
                }
            }
            if info.exclusion.is_none() {
                if tables.windows(2).any(|w| w[0] != w[1]) {
                    warnings.push(format!("cell type '{ty}' members disagree on pins or function; excluded"));
                    info.exclusion = Some(Exclusion::Inconsistent);
                } else {
                    info.truth_table = tables.into_iter().next();
                }
            }
            if let Some(e) = &info.exclusion {
                if matches!(e, Exclusion::NoFunction) {
                    warnings.push(format!("cell type '{ty}' has no evaluable function; excluded"));
                }
            }
            types.insert(ty, info);
        }
        Self { types, warnings }
    }

    pub fn get(&self, ty: &str) -> Result<&CellTypeInfo, BoolFnError> {
        self.types.get(ty).ok_or_else(|| BoolFnError::UnknownType(ty.to_string()))
    }

    pub fn truth_table(&self, ty: &str) -> Result<&TruthTable, BoolFnError> {
        let info = self.get(ty)?;
        match (&info.truth_table, &info.exclusion) {
            (Some(t), _) => Ok(t),
            (None, Some(Exclusion::MultiOutput)) => Err(BoolFnError::MultiOutput(ty.to_string())),
            (None, Some(Exclusion::TooManyInputs(n))) => {
                Err(BoolFnError::TooManyInputs { n: *n, limit: DEFAULT_INPUT_LIMIT })
            }
            (None, e) => Err(BoolFnError::NoFunction { ty: ty.to_string(), reason: format!("{e:?}") }),
        }
    }

    /// Types usable in functional tests, in name order.
    pub fn functional_types(&self) -> impl Iterator<Item = (&str, &TruthTable)> {
        self.types.iter().filter_map(|(k, v)| v.truth_table.as_ref().map(|t| (k.as_str(), t)))
    }

    /// Functional types grouped by their sorted input pin list.
    pub fn pin_groups(&self) -> BTreeMap<Vec<String>, Vec<String>> {
        let mut out: BTreeMap<Vec<String>, Vec<String>> = BTreeMap::new();
        for (ty, t) in self.functional_types() {
            out.entry(t.input_pins.clone()).or_default().push(ty.to_string());
        }
        out
    }

    pub fn fun_sim(&self, a: &str, b: &str) -> Result<f64, BoolFnError> {
        fun_sim(self.truth_table(a)?, self.truth_table(b)?)
    }

    pub fn is_inverting_pair(&self, a: &str, b: &str) -> Result<bool, BoolFnError> {
        is_inverting(self.truth_table(a)?, self.truth_table(b)?)
    }

    /// Inverting pairs oriented so the first type outputs 1 when every input is 1.
    pub fn inverting_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (_, group) in self.pin_groups() {
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    let ta = &self.types[a].truth_table.as_ref().unwrap();
                    let tb = &self.types[b].truth_table.as_ref().unwrap();
                    if is_inverting(ta, tb).unwrap_or(false) {
                        if *ta.bits.last().unwrap() {
                            out.push((a.clone(), b.clone()));
                        } else {
                            out.push((b.clone(), a.clone()));
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }
}

/// Evaluates a cell's single-output function for a named assignment.
pub fn eval(expr: &BoolExpr, assignment: &HashMap<String, bool>) -> Result<bool, BoolFnError> {
    expr.eval(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pins(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn tt(f: &str, p: &[&str]) -> TruthTable {
        TruthTable::from_expr(&BoolExpr::parse(f).unwrap(), &pins(p), DEFAULT_INPUT_LIMIT).unwrap()
    }

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn reference_tables() {
        assert_eq!(tt("!(A * B)", &["A", "B"]).bits, bits("1110"));
        assert_eq!(tt("A ^ B", &["A", "B"]).bits, bits("0110"));
        assert_eq!(tt("A*B + A*C + B*C", &["C", "B", "A"]).bits, bits("00010111"));
    }

    #[test]
    fn majority_by_enumeration() {
        // Oracle: count ones among the three inputs.
        let t = tt("A*B + A*C + B*C", &["A", "B", "C"]);
        for i in 0..8usize {
            assert_eq!(t.bits[i], i.count_ones() >= 2);
        }
    }

    #[test]
    fn funsim_reference_values() {
        let nand = tt("!(A * B)", &["A", "B"]);
        let nor = tt("!(A + B)", &["A", "B"]);
        let xor = tt("A ^ B", &["A", "B"]);
        assert_eq!(fun_sim(&nand, &nor).unwrap(), 2.0 / 4.0);
        assert_eq!(fun_sim(&xor, &nor).unwrap(), 1.0 / 4.0);
        assert_eq!(fun_sim(&xor, &xor).unwrap(), 1.0);
        let inv = tt("!A", &["A"]);
        assert!(matches!(fun_sim(&inv, &nand), Err(BoolFnError::PinMismatch { .. })));
    }

    #[test]
    fn inverting_examples() {
        assert!(is_inverting(&tt("A", &["A"]), &tt("!A", &["A"])).unwrap());
        assert!(is_inverting(&tt("A * B", &["A", "B"]), &tt("!(A * B)", &["A", "B"])).unwrap());
        assert!(!is_inverting(&tt("!(A * B)", &["A", "B"]), &tt("!(A + B)", &["A", "B"])).unwrap());
    }

    #[test]
    fn too_many_inputs() {
        let names: Vec<String> = (0..11).map(|i| format!("I{i}")).collect();
        let f = names.join(" * ");
        let e = BoolExpr::parse(&f).unwrap();
        assert_eq!(
            TruthTable::from_expr(&e, &names, DEFAULT_INPUT_LIMIT),
            Err(BoolFnError::TooManyInputs { n: 11, limit: 10 })
        );
    }

    fn arb_expr(pins: usize) -> impl Strategy<Value = BoolExpr> {
        let leaf = prop_oneof![
            (0..pins).prop_map(|i| BoolExpr::Var(format!("P{i}"))),
            any::<bool>().prop_map(BoolExpr::Const),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(BoolExpr::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::or(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| BoolExpr::xor(a, b)),
            ]
        })
    }

    /// Independent interpreter over the printed text, written directly on the
    /// grammar with a shunting-yard evaluator.
    fn interpret(text: &str, values: &HashMap<String, bool>) -> bool {
        fn prec(op: char) -> u8 {
            match op {
                '!' => 4,
                '*' => 3,
                '^' => 2,
                '+' => 1,
                _ => 0,
            }
        }
        fn apply(op: char, vals: &mut Vec<bool>) {
            if op == '!' {
                let v = vals.pop().unwrap();
                vals.push(!v);
                return;
            }
            let b = vals.pop().unwrap();
            let a = vals.pop().unwrap();
            vals.push(match op {
                '*' => a && b,
                '^' => a != b,
                _ => a || b,
            });
        }
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut vals: Vec<bool> = vec![];
        let mut ops: Vec<char> = vec![];
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                '(' | '!' => ops.push(c),
                ')' => {
                    while let Some(&op) = ops.last() {
                        ops.pop();
                        if op == '(' {
                            break;
                        }
                        apply(op, &mut vals);
                    }
                    while ops.last() == Some(&'!') {
                        ops.pop();
                        apply('!', &mut vals);
                    }
                }
                '*' | '^' | '+' => {
                    while let Some(&op) = ops.last() {
                        if op != '(' && prec(op) >= prec(c) {
                            ops.pop();
                            apply(op, &mut vals);
                        } else {
                            break;
                        }
                    }
                    ops.push(c);
                }
                _ => {
                    let start = i;
                    while i + 1 < chars.len() && chars[i + 1].is_ascii_alphanumeric() {
                        i += 1;
                    }
                    let word: String = chars[start..=i].iter().collect();
                    vals.push(match word.as_str() {
                        "0" => false,
                        "1" => true,
                        w => values[w],
                    });
                    while ops.last() == Some(&'!') {
                        ops.pop();
                        apply('!', &mut vals);
                    }
                }
            }
            i += 1;
        }
        while let Some(op) = ops.pop() {
            apply(op, &mut vals);
        }
        vals.pop().unwrap()
    }

    proptest! {
        #[test]
        fn eval_matches_independent_interpreter(e in arb_expr(6), a in 0usize..64) {
            let names: Vec<String> = (0..6).map(|i| format!("P{i}")).collect();
            let values: HashMap<String, bool> =
                names.iter().cloned().zip(assignment_bits(a, 6)).collect();
            let text = e.to_string();
            prop_assert_eq!(e.eval(&values).unwrap(), interpret(&text, &values), "{}", text);
        }

        #[test]
        fn print_parse_identity(e in arb_expr(4)) {
            prop_assert_eq!(BoolExpr::parse(&e.to_string()).unwrap(), e);
        }

        #[test]
        fn truth_table_agrees_with_eval(e in arb_expr(4)) {
            let names: Vec<String> = (0..4).map(|i| format!("P{i}")).collect();
            let t = TruthTable::from_expr(&e, &names, DEFAULT_INPUT_LIMIT).unwrap();
            for i in 0..16 {
                let m: HashMap<String, bool> = t.assignment(i).into_iter().collect();
                prop_assert_eq!(t.bits[i], e.eval(&m).unwrap());
            }
        }

        #[test]
        fn funsim_symmetric(a in arb_expr(3), b in arb_expr(3)) {
            let names: Vec<String> = (0..3).map(|i| format!("P{i}")).collect();
            let ta = TruthTable::from_expr(&a, &names, 10).unwrap();
            let tb = TruthTable::from_expr(&b, &names, 10).unwrap();
            prop_assert_eq!(fun_sim(&ta, &tb).unwrap(), fun_sim(&tb, &ta).unwrap());
            prop_assert_eq!(fun_sim(&ta, &ta).unwrap(), 1.0);
            prop_assert_eq!(is_inverting(&ta, &tb).unwrap(), fun_sim(&ta, &tb).unwrap() == 0.0);
        }
    }
}
