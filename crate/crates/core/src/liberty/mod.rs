// SPDX-License-Identifier: Apache-2.0

//! Liberty reader for the subset needed here: library units, table
//! templates, cells, pins with functions, NLDM timing and internal power.

mod ast;
mod lut;
mod naming;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::boolfn::BoolExpr;

pub use ast::{parse_groups, Attr, Group};
pub use lut::{lut_query, LookupTable2D, Property};
pub use naming::{drive_strength, CellNamer, DEFAULT_RULES};

#[derive(Debug, Error)]
pub enum LibertyError {
    #[error("syntax error at line {line}: expected {expected}")]
    Syntax { line: usize, expected: String },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("naming error: {0}")]
    Naming(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn serialize_function<S: Serializer>(f: &Option<BoolExpr>, s: S) -> Result<S::Ok, S::Error> {
    match f {
        Some(e) => s.serialize_some(&e.to_string()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputPin {
    pub name: String,
    #[serde(serialize_with = "serialize_function")]
    pub function: Option<BoolExpr>,
}

/// Identifies one timing arc.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
pub struct ArcId {
    pub cell: String,
    pub output_pin: String,
    pub related_pin: String,
}

impl std::fmt::Display for ArcId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "arc({},{},{})", self.cell, self.output_pin, self.related_pin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingArcTables {
    pub output_pin: String,
    pub related_pin: String,
    pub tables: BTreeMap<Property, LookupTable2D>,
}

impl TimingArcTables {
    /// All six properties are characterized.
    pub fn is_complete(&self) -> bool {
        Property::ALL.iter().all(|p| self.tables.contains_key(p))
    }

    pub fn missing(&self) -> Vec<Property> {
        Property::ALL.into_iter().filter(|p| !self.tables.contains_key(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub name: String,
    pub cell_type: String,
    pub input_pins: Vec<String>,
    pub output_pins: Vec<OutputPin>,
    pub arcs: Vec<TimingArcTables>,
    /// Declares an `ff`, `latch` or `statetable` group.
    pub is_sequential: bool,
    pub pin_capacitance: BTreeMap<String, f64>,
}

impl Cell {
    pub fn arc(&self, output_pin: &str, related_pin: &str) -> Option<&TimingArcTables> {
        self.arcs.iter().find(|a| a.output_pin == output_pin && a.related_pin == related_pin)
    }

    pub fn arc_id(&self, arc: &TimingArcTables) -> ArcId {
        ArcId { cell: self.name.clone(), output_pin: arc.output_pin.clone(), related_pin: arc.related_pin.clone() }
    }

    /// Combinational, one output pin, with a known function.
    pub fn single_output_function(&self) -> Option<&BoolExpr> {
        if self.is_sequential || self.output_pins.len() != 1 {
            return None;
        }
        self.output_pins[0].function.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Library {
    pub name: String,
    pub cells: BTreeMap<String, Cell>,
    pub slew_unit: String,
    pub load_unit: String,
    pub time_unit: String,
    pub warnings: Vec<String>,
}

/// Schema version of the JSON dump written by [`Library::to_json`].
pub const LIBRARY_JSON_SCHEMA: u32 = 1;

impl Library {
    pub fn cell(&self, name: &str) -> Option<&Cell> {
        self.cells.get(name)
    }

    /// Cell names grouped by type key, both sorted.
    pub fn cell_types(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for cell in self.cells.values() {
            out.entry(cell.cell_type.clone()).or_default().push(cell.name.clone());
        }
        out
    }

    pub fn arc_count(&self) -> usize {
        self.cells.values().map(|c| c.arcs.len()).sum()
    }

    pub fn arc(&self, id: &ArcId) -> Option<&TimingArcTables> {
        self.cells.get(&id.cell)?.arc(&id.output_pin, &id.related_pin)
    }

    /// Merges several parsed files; the first definition of a cell wins.
    pub fn merge(libs: Vec<Library>) -> Library {
        let mut iter = libs.into_iter();
        let mut out = match iter.next() {
            Some(l) => l,
            None => {
                return Library {
                    name: String::new(),
                    cells: BTreeMap::new(),
                    slew_unit: String::new(),
                    load_unit: String::new(),
                    time_unit: String::new(),
                    warnings: vec![],
                }
            }
        };
        for lib in iter {
            if lib.time_unit != out.time_unit || lib.load_unit != out.load_unit {
                out.warnings.push(format!(
                    "library '{}' declares units ({}, {}) differing from ({}, {})",
                    lib.name, lib.time_unit, lib.load_unit, out.time_unit, out.load_unit
                ));
            }
            out.warnings.extend(lib.warnings);
            for (name, cell) in lib.cells {
                match out.cells.entry(name) {
                    std::collections::btree_map::Entry::Occupied(e) => {
                        out.warnings.push(format!("duplicate cell '{}' in '{}' ignored", e.key(), lib.name));
                    }
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(cell);
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("library serializes");
        v["schema"] = serde_json::json!(LIBRARY_JSON_SCHEMA);
        v
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub namer: CellNamer,
}

pub fn parse_liberty(text: &str) -> Result<Library, LibertyError> {
    parse_liberty_with(text, &ParseOptions::default())
}

pub fn parse_liberty_file(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<Library, LibertyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| LibertyError::Io { path: path.display().to_string(), source })?;
    parse_liberty_with(&text, opts)
}

/// Parses and merges several files in the given order.
pub fn parse_liberty_files<P: AsRef<Path>>(paths: &[P], opts: &ParseOptions) -> Result<Library, LibertyError> {
    let libs = paths.iter().map(|p| parse_liberty_file(p, opts)).collect::<Result<Vec<_>, _>>()?;
    Ok(Library::merge(libs))
}

pub fn parse_liberty_with(text: &str, opts: &ParseOptions) -> Result<Library, LibertyError> {
    let groups = parse_groups(text)?;
    let lib_group = match groups.iter().find(|g| g.kind == "library") {
        Some(g) => g,
        None => return Err(LibertyError::Syntax { line: 1, expected: "a 'library' group".into() }),
    };
    Builder::new(opts).build(lib_group)
}

#[derive(Debug, Clone)]
struct Template {
    index1: Option<Vec<f64>>,
    index2: Option<Vec<f64>>,
    /// variable_1 is the load axis
    load_first: bool,
}

struct Builder<'a> {
    opts: &'a ParseOptions,
    templates: HashMap<String, Template>,
    skipped: BTreeMap<String, usize>,
    notes: Vec<String>,
}

const LIBRARY_SKIP_QUIET: &[&str] = &["time_unit", "capacitive_load_unit"];

fn parse_numbers(parts: &[String], line: usize) -> Result<Vec<f64>, LibertyError> {
    let mut out = Vec::new();
    for part in parts {
        for tok in part.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 =
                tok.parse().map_err(|_| LibertyError::Syntax { line, expected: format!("number, found '{tok}'") })?;
            out.push(v);
        }
    }
    Ok(out)
}

fn parse_rows(parts: &[String], line: usize) -> Result<Vec<Vec<f64>>, LibertyError> {
    parts.iter().map(|p| parse_numbers(std::slice::from_ref(p), line)).collect()
}

fn is_load_variable(v: &str) -> bool {
    v.contains("capacitance")
}

fn attr_line(g: &Group, name: &str) -> usize {
    g.attrs.iter().find(|a| a.name() == name).map_or(g.line, |a| match a {
        Attr::Simple { line, .. } | Attr::Complex { line, .. } => *line,
    })
}

impl<'a> Builder<'a> {
    fn new(opts: &'a ParseOptions) -> Self {
        Self { opts, templates: HashMap::new(), skipped: BTreeMap::new(), notes: vec![] }
    }

    fn skip(&mut self, what: String) {
        *self.skipped.entry(what).or_default() += 1;
    }

    fn build(mut self, lib: &Group) -> Result<Library, LibertyError> {
        let name = lib.args.first().cloned().unwrap_or_default();
        let time_unit = lib.simple("time_unit").unwrap_or("").to_string();
        let load_unit = lib
            .complex("capacitive_load_unit")
            .map(|v| v.iter().map(|s| s.trim()).collect::<Vec<_>>().join(""))
            .unwrap_or_default();
        for a in &lib.attrs {
            if !LIBRARY_SKIP_QUIET.contains(&a.name()) {
                self.skip(format!("library attribute '{}'", a.name()));
            }
        }
        for g in &lib.groups {
            if g.kind == "lu_table_template" || g.kind == "power_lut_template" {
                self.add_template(g)?;
            }
        }
        let mut cells = BTreeMap::new();
        for g in &lib.groups {
            match g.kind.as_str() {
                "lu_table_template" | "power_lut_template" => {}
                "cell" => {
                    if let Some(cell) = self.build_cell(g)? {
                        if cells.contains_key(&cell.name) {
                            self.notes.push(format!("duplicate cell '{}' ignored", cell.name));
                        } else {
                            cells.insert(cell.name.clone(), cell);
                        }
                    }
                }
                other => self.skip(format!("library group '{other}'")),
            }
        }
        let mut warnings = self.notes;
        warnings.extend(self.skipped.into_iter().map(|(what, n)| format!("skipped {what} ({n}x)")));
        Ok(Library { name, cells, slew_unit: time_unit.clone(), load_unit, time_unit, warnings })
    }

    fn add_template(&mut self, g: &Group) -> Result<(), LibertyError> {
        let name = g
            .args
            .first()
            .cloned()
            .ok_or_else(|| LibertyError::Syntax { line: g.line, expected: "template name".into() })?;
        let load_first = g.simple("variable_1").is_some_and(is_load_variable);
        let index1 = g.complex("index_1").map(|v| parse_numbers(v, attr_line(g, "index_1"))).transpose()?;
        let index2 = g.complex("index_2").map(|v| parse_numbers(v, attr_line(g, "index_2"))).transpose()?;
        self.templates.insert(name, Template { index1, index2, load_first });
        Ok(())
    }

    fn build_cell(&mut self, g: &Group) -> Result<Option<Cell>, LibertyError> {
        let name = g
            .args
            .first()
            .cloned()
            .ok_or_else(|| LibertyError::Syntax { line: g.line, expected: "cell name".into() })?;
        let cell_type = self.opts.namer.cell_type_of(&name)?;
        let is_sequential = g.groups.iter().any(|s| matches!(s.kind.as_str(), "ff" | "latch" | "statetable"));
        let mut state_vars: BTreeSet<String> = BTreeSet::new();
        for s in g.groups.iter().filter(|s| matches!(s.kind.as_str(), "ff" | "latch")) {
            for a in &s.args {
                for v in a.split(|c: char| c == ',' || c.is_whitespace()).filter(|v| !v.is_empty()) {
                    state_vars.insert(v.to_string());
                }
            }
        }

        for a in &g.attrs {
            self.skip(format!("cell attribute '{}'", a.name()));
        }
        let mut input_pins = Vec::new();
        let mut outputs: Vec<(&Group, String)> = Vec::new();
        let mut pin_capacitance = BTreeMap::new();
        for sub in &g.groups {
            match sub.kind.as_str() {
                "pin" => {
                    let pin_name = sub
                        .args
                        .first()
                        .cloned()
                        .ok_or_else(|| LibertyError::Syntax { line: sub.line, expected: "pin name".into() })?;
                    for a in &sub.attrs {
                        if !matches!(a.name(), "direction" | "function" | "capacitance") {
                            self.skip(format!("pin attribute '{}'", a.name()));
                        }
                    }
                    if let Some(c) = sub.simple("capacitance").and_then(|c| c.parse::<f64>().ok()) {
                        pin_capacitance.insert(pin_name.clone(), c);
                    }
                    match sub.simple("direction") {
                        Some("input") => input_pins.push(pin_name),
                        Some("output") | Some("inout") => outputs.push((sub, pin_name)),
                        Some(other) => self.skip(format!("pin direction '{other}'")),
                        None => self.skip("pin without direction".into()),
                    }
                }
                "ff" | "latch" | "statetable" => {}
                other => self.skip(format!("cell group '{other}'")),
            }
        }

        if outputs.is_empty() {
            self.notes.push(format!("cell '{name}' has no output pin; excluded"));
            return Ok(None);
        }

        let mut output_pins = Vec::new();
        let mut arcs: Vec<TimingArcTables> = Vec::new();
        for (pin_group, pin_name) in outputs {
            let function = match pin_group.simple("function") {
                None => None,
                Some(text) => {
                    let expr = BoolExpr::parse(text).map_err(|e| LibertyError::Syntax {
                        line: attr_line(pin_group, "function"),
                        expected: format!("boolean expression ({e})"),
                    })?;
                    let unknown: Vec<String> = expr.leaves().into_iter().filter(|l| !input_pins.contains(l)).collect();
                    if unknown.is_empty() {
                        Some(expr)
                    } else if unknown.iter().all(|u| state_vars.contains(u)) {
                        self.notes.push(format!(
                            "cell '{name}' pin '{pin_name}' function references internal state {unknown:?}; function dropped"
                        ));
                        None
                    } else {
                        return Err(LibertyError::Semantic(format!(
                            "cell '{name}' pin '{pin_name}' function references undeclared pin(s) {unknown:?}"
                        )));
                    }
                }
            };
            self.collect_arcs(&name, pin_group, &pin_name, &input_pins, &mut arcs)?;
            output_pins.push(OutputPin { name: pin_name, function });
        }

        Ok(Some(Cell { name, cell_type, input_pins, output_pins, arcs, is_sequential, pin_capacitance }))
    }

    fn collect_arcs(
        &mut self,
        cell: &str,
        pin_group: &Group,
        pin_name: &str,
        input_pins: &[String],
        arcs: &mut Vec<TimingArcTables>,
    ) -> Result<(), LibertyError> {
        // (related pin) -> tables collected from this pin's timing and power groups
        let mut seen_timing: BTreeSet<String> = BTreeSet::new();
        let mut seen_power: BTreeSet<String> = BTreeSet::new();
        for sub in &pin_group.groups {
            let is_timing = match sub.kind.as_str() {
                "timing" => true,
                "internal_power" => false,
                other => {
                    self.skip(format!("pin group '{other}'"));
                    continue;
                }
            };
            let related = match sub.simple("related_pin") {
                Some(r) => r.split_whitespace().map(str::to_string).collect::<Vec<_>>(),
                None => {
                    self.skip(format!("{} group without related_pin", sub.kind));
                    continue;
                }
            };
            let props: &[Property] = if is_timing {
                &[Property::RiseDelay, Property::FallDelay, Property::RiseTransition, Property::FallTransition]
            } else {
                &[Property::RiseInternalPower, Property::FallInternalPower]
            };
            for a in &sub.attrs {
                if a.name() != "related_pin" {
                    self.skip(format!("{} attribute '{}'", sub.kind, a.name()));
                }
            }
            let mut tables = BTreeMap::new();
            for t in &sub.groups {
                match props.iter().find(|p| p.liberty_group() == t.kind) {
                    Some(p) => {
                        tables.insert(*p, self.build_table(t)?);
                    }
                    None => self.skip(format!("{} group '{}'", sub.kind, t.kind)),
                }
            }
            for rp in related {
                if !input_pins.contains(&rp) {
                    self.skip(format!("{} group related to non-input pin", sub.kind));
                    continue;
                }
                let seen = if is_timing { &mut seen_timing } else { &mut seen_power };
                if !seen.insert(rp.clone()) {
                    self.notes.push(format!("cell '{cell}' arc ({pin_name}, {rp}): extra {} group ignored", sub.kind));
                    continue;
                }
                let idx = match arcs.iter().position(|a| a.output_pin == pin_name && a.related_pin == rp) {
                    Some(i) => i,
                    None => {
                        arcs.push(TimingArcTables {
                            output_pin: pin_name.to_string(),
                            related_pin: rp.clone(),
                            tables: BTreeMap::new(),
                        });
                        arcs.len() - 1
                    }
                };
                for (p, t) in &tables {
                    arcs[idx].tables.insert(*p, t.clone());
                }
            }
        }
        Ok(())
    }

    fn build_table(&mut self, g: &Group) -> Result<LookupTable2D, LibertyError> {
        let tname = g.args.first().map(String::as_str).unwrap_or("scalar");
        let template = if tname == "scalar" {
            Template { index1: None, index2: None, load_first: false }
        } else {
            self.templates.get(tname).cloned().ok_or_else(|| {
                LibertyError::Semantic(format!(
                    "line {}: table '{}' references unknown template '{tname}'",
                    g.line, g.kind
                ))
            })?
        };
        let own1 = g.complex("index_1").map(|v| parse_numbers(v, attr_line(g, "index_1"))).transpose()?;
        let own2 = g.complex("index_2").map(|v| parse_numbers(v, attr_line(g, "index_2"))).transpose()?;
        let values_line = attr_line(g, "values");
        let rows = match g.complex("values") {
            Some(v) => parse_rows(v, values_line)?,
            None => return Err(LibertyError::Semantic(format!("line {}: table '{}' has no values", g.line, g.kind))),
        };
        let mut index1 = own1.or(template.index1).unwrap_or_default();
        let mut index2 = own2.or(template.index2).unwrap_or_default();
        // A single quoted row over the second axis (1-D table) or a scalar.
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if index1.is_empty() && index2.is_empty() && flat.len() == 1 {
            index1 = vec![1.0];
            index2 = vec![1.0];
        } else if index2.is_empty() {
            index2 = vec![1.0];
            if rows.len() == 1 && index1.len() == flat.len() {
                // 1-D tables list their values in a single row
                let t = LookupTable2D::new(index1, index2, flat).map_err(|e| at_line(e, values_line))?;
                return Ok(if template.load_first { t.transposed() } else { t });
            }
        }
        if rows.len() != index1.len() || rows.iter().any(|r| r.len() != index2.len()) {
            return Err(LibertyError::Semantic(format!(
                "line {values_line}: table '{}' shape does not match its {}x{} index",
                g.kind,
                index1.len(),
                index2.len()
            )));
        }
        let t = LookupTable2D::new(index1, index2, flat).map_err(|e| at_line(e, values_line))?;
        Ok(if template.load_first { t.transposed() } else { t })
    }
}

fn at_line(e: LibertyError, line: usize) -> LibertyError {
    match e {
        LibertyError::Semantic(m) => LibertyError::Semantic(format!("line {line}: {m}")),
        other => other,
    }
}
