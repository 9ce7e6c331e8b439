// SPDX-License-Identifier: Apache-2.0

//! Liberty `function` expressions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! or    := xor ( ('+' | '|') xor )*
//! xor   := and ( '^' and )*
//! and   := unary ( ('*' | '&')? unary )*      juxtaposition is an implicit AND
//! unary := '!' unary | atom '\''*
//! atom  := IDENT | '0' | '1' | '(' or ')'
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::BoolFnError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Const(bool),
    Var(String),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Xor(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn var(name: impl Into<String>) -> Self {
        BoolExpr::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    pub fn and(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn xor(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::Xor(Box::new(a), Box::new(b))
    }

    pub fn parse(text: &str) -> Result<Self, BoolFnError> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0, text };
        let e = p.parse_or()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("end of expression"));
        }
        Ok(e)
    }

    /// Distinct variable names, sorted.
    pub fn leaves(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(v) => {
                out.insert(v.clone());
            }
            BoolExpr::Not(e) => e.collect_leaves(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            BoolExpr::Const(_) | BoolExpr::Var(_) => 1,
            BoolExpr::Not(e) => 1 + e.depth(),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Evaluates with a lookup closure; unassigned leaves are reported as `MissingPin`.
    pub fn eval_with<F>(&self, lookup: &F) -> Result<bool, BoolFnError>
    where
        F: Fn(&str) -> Option<bool>,
    {
        Ok(match self {
            BoolExpr::Const(c) => *c,
            BoolExpr::Var(v) => lookup(v).ok_or_else(|| BoolFnError::MissingPin(v.clone()))?,
            BoolExpr::Not(e) => !e.eval_with(lookup)?,
            BoolExpr::And(a, b) => a.eval_with(lookup)? & b.eval_with(lookup)?,
            BoolExpr::Or(a, b) => a.eval_with(lookup)? | b.eval_with(lookup)?,
            BoolExpr::Xor(a, b) => a.eval_with(lookup)? ^ b.eval_with(lookup)?,
        })
    }

    pub fn eval(&self, assignment: &HashMap<String, bool>) -> Result<bool, BoolFnError> {
        self.eval_with(&|name: &str| assignment.get(name).copied())
    }

    /// Resolves leaves to positions in `pins` for fast repeated evaluation.
    pub fn compile(&self, pins: &[String]) -> Result<CompiledExpr, BoolFnError> {
        let mut ops = Vec::new();
        self.emit(pins, &mut ops)?;
        Ok(CompiledExpr { ops, arity: pins.len() })
    }

    fn emit(&self, pins: &[String], ops: &mut Vec<Op>) -> Result<(), BoolFnError> {
        match self {
            BoolExpr::Const(c) => ops.push(Op::Const(*c)),
            BoolExpr::Var(v) => {
                let idx = pins.iter().position(|p| p == v).ok_or_else(|| BoolFnError::MissingPin(v.clone()))?;
                ops.push(Op::Load(idx));
            }
            BoolExpr::Not(e) => {
                e.emit(pins, ops)?;
                ops.push(Op::Not);
            }
            BoolExpr::And(a, b) => {
                a.emit(pins, ops)?;
                b.emit(pins, ops)?;
                ops.push(Op::And);
            }
            BoolExpr::Or(a, b) => {
                a.emit(pins, ops)?;
                b.emit(pins, ops)?;
                ops.push(Op::Or);
            }
            BoolExpr::Xor(a, b) => {
                a.emit(pins, ops)?;
                b.emit(pins, ops)?;
                ops.push(Op::Xor);
            }
        }
        Ok(())
    }

    fn precedence(&self) -> u8 {
        match self {
            BoolExpr::Or(..) => 1,
            BoolExpr::Xor(..) => 2,
            BoolExpr::And(..) => 3,
            BoolExpr::Not(..) => 4,
            BoolExpr::Const(_) | BoolExpr::Var(_) => 5,
        }
    }
}

// Binary operators print left-associatively; a right operand of equal
// precedence gets parentheses so that parse(print(e)) == e.
impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn side(f: &mut fmt::Formatter<'_>, e: &BoolExpr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        let prec = self.precedence();
        let (a, b, op) = match self {
            BoolExpr::Const(true) => return f.write_str("1"),
            BoolExpr::Const(false) => return f.write_str("0"),
            BoolExpr::Var(v) => return f.write_str(v),
            BoolExpr::Not(e) => {
                f.write_str("!")?;
                return side(f, e, 4);
            }
            BoolExpr::And(a, b) => (a, b, " * "),
            BoolExpr::Xor(a, b) => (a, b, " ^ "),
            BoolExpr::Or(a, b) => (a, b, " + "),
        };
        side(f, a, prec)?;
        f.write_str(op)?;
        side(f, b, prec + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Const(bool),
    Load(usize),
    Not,
    And,
    Or,
    Xor,
}

/// Postfix program over positional inputs. Evaluates on single bits or on
/// 64-wide bit-parallel words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    arity: usize,
}

impl CompiledExpr {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval_words(&self, inputs: &[u64]) -> u64 {
        debug_assert_eq!(inputs.len(), self.arity);
        let mut stack: Vec<u64> = Vec::with_capacity(8);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(if c { !0 } else { 0 }),
                Op::Load(i) => stack.push(inputs[i]),
                Op::Not => {
                    let v = stack.pop().unwrap();
                    stack.push(!v);
                }
                Op::And | Op::Or | Op::Xor => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(match op {
                        Op::And => a & b,
                        Op::Or => a | b,
                        _ => a ^ b,
                    });
                }
            }
        }
        stack.pop().unwrap()
    }

    pub fn eval_bits(&self, inputs: &[bool]) -> bool {
        let words: Vec<u64> = inputs.iter().map(|&b| if b { 1 } else { 0 }).collect();
        self.eval_words(&words) & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Const(bool),
    Not,
    Postfix,
    And,
    Or,
    Xor,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, BoolFnError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' | '"' => {
                i += 1;
                continue;
            }
            '!' => Tok::Not,
            '\'' => Tok::Postfix,
            '*' | '&' => Tok::And,
            '+' | '|' => Tok::Or,
            '^' => Tok::Xor,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_alphanumeric() || c == '_' || c == '[' || c == ']' || c == '.' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' || c == '[' || c == ']' || c == '.' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &text[start..i];
                let tok = match word {
                    "0" => Tok::Const(false),
                    "1" => Tok::Const(true),
                    w => Tok::Ident(w.to_string()),
                };
                out.push((tok, start));
                continue;
            }
            other => {
                return Err(BoolFnError::Parse {
                    text: text.to_string(),
                    position: i,
                    expected: format!("operator or pin name, found '{other}'"),
                })
            }
        };
        out.push((tok, i));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn error(&self, expected: &str) -> BoolFnError {
        let position = self.tokens.get(self.pos).map_or(self.text.len(), |(_, p)| *p);
        BoolFnError::Parse { text: self.text.to_string(), position, expected: expected.to_string() }
    }

    fn parse_or(&mut self) -> Result<BoolExpr, BoolFnError> {
        let mut lhs = self.parse_xor()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let rhs = self.parse_xor()?;
            lhs = BoolExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_xor(&mut self) -> Result<BoolExpr, BoolFnError> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some(&Tok::Xor) {
            self.pos += 1;
            let rhs = self.parse_and()?;
            lhs = BoolExpr::xor(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<BoolExpr, BoolFnError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Tok::And) => {
                    self.pos += 1;
                }
                Some(Tok::Ident(_)) | Some(Tok::Const(_)) | Some(Tok::Not) | Some(Tok::LParen) => {}
                _ => break,
            }
            let rhs = self.parse_unary()?;
            lhs = BoolExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<BoolExpr, BoolFnError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(BoolExpr::not(self.parse_unary()?));
        }
        let mut e = self.parse_atom()?;
        while self.peek() == Some(&Tok::Postfix) {
            self.pos += 1;
            e = BoolExpr::not(e);
        }
        Ok(e)
    }

    fn parse_atom(&mut self) -> Result<BoolExpr, BoolFnError> {
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(BoolExpr::Var(name))
            }
            Some(Tok::Const(c)) => {
                self.pos += 1;
                Ok(BoolExpr::Const(c))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.parse_or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            _ => Err(self.error("pin name, constant or '('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assign(pairs: &[(&str, bool)]) -> HashMap<String, bool> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn and2_example() {
        let e = BoolExpr::parse("A * B").unwrap();
        assert!(!e.eval(&assign(&[("A", true), ("B", false)])).unwrap());
    }

    #[test]
    fn inverter() {
        let e = BoolExpr::parse("!A").unwrap();
        assert!(e.eval(&assign(&[("A", false)])).unwrap());
    }

    #[test]
    fn xor_or_not_combo() {
        let e = BoolExpr::parse("(A ^ B) + !C").unwrap();
        assert!(!e.eval(&assign(&[("A", true), ("B", true), ("C", true)])).unwrap());
    }

    #[test]
    fn missing_pin() {
        let e = BoolExpr::parse("A * B").unwrap();
        assert_eq!(e.eval(&assign(&[("A", true)])), Err(BoolFnError::MissingPin("B".into())));
    }

    #[test]
    fn precedence_not_and_xor_or() {
        // A + B ^ C * !D  ==  A + (B ^ (C * (!D)))
        let e = BoolExpr::parse("A + B ^ C * !D").unwrap();
        let expected = BoolExpr::or(
            BoolExpr::var("A"),
            BoolExpr::xor(BoolExpr::var("B"), BoolExpr::and(BoolExpr::var("C"), BoolExpr::not(BoolExpr::var("D")))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn liberty_variants() {
        let a = BoolExpr::parse("(A1 & A2) | B'").unwrap();
        let b = BoolExpr::parse("(A1 * A2) + !B").unwrap();
        assert_eq!(a, b);
        let c = BoolExpr::parse("A B").unwrap();
        assert_eq!(c, BoolExpr::and(BoolExpr::var("A"), BoolExpr::var("B")));
        assert_eq!(BoolExpr::parse("\"(!A)\"").unwrap(), BoolExpr::not(BoolExpr::var("A")));
        assert_eq!(BoolExpr::parse("1").unwrap(), BoolExpr::Const(true));
    }

    #[test]
    fn malformed() {
        assert!(BoolExpr::parse("A * ").is_err());
        assert!(BoolExpr::parse("(A + B").is_err());
        assert!(BoolExpr::parse("A $ B").is_err());
        assert!(BoolExpr::parse("").is_err());
    }

    #[test]
    fn print_keeps_structure() {
        for s in ["A * (B * C)", "!(A + B)", "(A + B) * C", "A ^ (B ^ C)", "!!A"] {
            let e = BoolExpr::parse(s).unwrap();
            assert_eq!(BoolExpr::parse(&e.to_string()).unwrap(), e, "{s}");
        }
    }

    #[test]
    fn compiled_matches_tree() {
        let e = BoolExpr::parse("(A1 * A2) + (B1 ^ !B2)").unwrap();
        let pins: Vec<String> = ["A1", "A2", "B1", "B2"].iter().map(|s| s.to_string()).collect();
        let c = e.compile(&pins).unwrap();
        for i in 0..16u32 {
            let bits: Vec<bool> = (0..4).map(|k| (i >> (3 - k)) & 1 == 1).collect();
            let m: HashMap<String, bool> = pins.iter().cloned().zip(bits.iter().copied()).collect();
            assert_eq!(c.eval_bits(&bits), e.eval(&m).unwrap());
        }
    }
}
