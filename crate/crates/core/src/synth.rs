// SPDX-License-Identifier: Apache-2.0

//! Synthetic Liberty libraries with ASAP7-style naming and NLDM tables from
//! a simple effort-based delay model. Used for demos and tests where no
//! foundry library is available.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpec {
    pub name: String,
    pub function: String,
    pub pins: Vec<String>,
    /// Drive-strength suffixes, e.g. `x1`, `xp5`.
    pub strengths: Vec<String>,
}

impl TypeSpec {
    pub fn new(name: &str, function: &str, pins: &[&str], strengths: &[&str]) -> Self {
        Self {
            name: name.into(),
            function: function.into(),
            pins: pins.iter().map(|s| s.to_string()).collect(),
            strengths: strengths.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn inverting(&self) -> bool {
        self.function.trim_start().starts_with('!')
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub library_name: String,
    pub types: Vec<TypeSpec>,
    pub slew_index: Vec<f64>,
    pub load_index: Vec<f64>,
    /// Adds a flip-flop, which has no combinational function.
    pub with_sequential: bool,
    pub seed: u64,
}

const SLEWS: [f64; 7] = [5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0];
const LOADS: [f64; 7] = [0.72, 1.44, 2.88, 5.76, 11.52, 23.04, 46.08];

impl SynthSpec {
    /// Eight types and twenty cells: INV, BUF and the six two-input gates.
    pub fn toy() -> Self {
        Self {
            library_name: "toy".into(),
            types: vec![
                TypeSpec::new("INV", "!A", &["A"], &["x1", "x2", "x4", "x8"]),
                TypeSpec::new("BUF", "A", &["A"], &["x2", "x4"]),
                TypeSpec::new("AND2", "A * B", &["A", "B"], &["x2", "x4"]),
                TypeSpec::new("NAND2", "!(A * B)", &["A", "B"], &["xp5", "x1", "x2"]),
                TypeSpec::new("OR2", "A + B", &["A", "B"], &["x2", "x4"]),
                TypeSpec::new("NOR2", "!(A + B)", &["A", "B"], &["xp5", "x1", "x2"]),
                TypeSpec::new("XOR2", "A ^ B", &["A", "B"], &["x1", "x2"]),
                TypeSpec::new("XNOR2", "!(A ^ B)", &["A", "B"], &["x1", "x2"]),
            ],
            slew_index: SLEWS.to_vec(),
            load_index: LOADS.to_vec(),
            with_sequential: false,
            seed: 7,
        }
    }

    /// A broader library modelled on the ASAP7 cell families.
    pub fn asap7_like() -> Self {
        let t = TypeSpec::new;
        let types = vec![
            t("INV", "!A", &["A"], &["xp33", "xp67", "x1", "x2", "x3", "x4", "x5", "x6", "x8", "x11", "x13"]),
            t("BUF", "A", &["A"], &["x2", "x3", "x4", "x6f", "x8", "x10", "x12", "x16f"]),
            t("AND2", "A * B", &["A", "B"], &["x2", "x4", "x6"]),
            t("AND3", "A * B * C", &["A", "B", "C"], &["x1", "x2", "x4"]),
            t("AND4", "A * B * C * D", &["A", "B", "C", "D"], &["x1", "x2"]),
            t("NAND2", "!(A * B)", &["A", "B"], &["xp33", "xp5", "xp67", "x1", "x1p5", "x2"]),
            t("NAND3", "!(A * B * C)", &["A", "B", "C"], &["xp33", "x1", "x2"]),
            t("NAND4", "!(A * B * C * D)", &["A", "B", "C", "D"], &["xp25", "xp75", "x2"]),
            t("OR2", "A + B", &["A", "B"], &["x2", "x4", "x6"]),
            t("OR3", "A + B + C", &["A", "B", "C"], &["x1", "x2", "x4"]),
            t("OR4", "A + B + C + D", &["A", "B", "C", "D"], &["x1", "x2"]),
            t("NOR2", "!(A + B)", &["A", "B"], &["xp33", "xp67", "x1", "x1p5", "x2"]),
            t("NOR3", "!(A + B + C)", &["A", "B", "C"], &["xp33", "x1", "x2"]),
            t("NOR4", "!(A + B + C + D)", &["A", "B", "C", "D"], &["xp25", "xp75", "x2"]),
            t("XOR2", "A ^ B", &["A", "B"], &["xp5", "x1", "x2"]),
            t("XNOR2", "!(A ^ B)", &["A", "B"], &["xp5", "x1", "x2"]),
            t("AO21", "(A1 * A2) + B", &["A1", "A2", "B"], &["x1", "x2"]),
            t("AOI21", "!((A1 * A2) + B)", &["A1", "A2", "B"], &["xp33", "xp5", "x1"]),
            t("OA21", "(A1 + A2) * B", &["A1", "A2", "B"], &["x2"]),
            t("OAI21", "!((A1 + A2) * B)", &["A1", "A2", "B"], &["xp33", "xp5", "x1"]),
            t("AO22", "(A1 * A2) + (B1 * B2)", &["A1", "A2", "B1", "B2"], &["x1", "x2"]),
            t("AOI22", "!((A1 * A2) + (B1 * B2))", &["A1", "A2", "B1", "B2"], &["xp33", "xp5", "x1"]),
            t("OA22", "(A1 + A2) * (B1 + B2)", &["A1", "A2", "B1", "B2"], &["x2"]),
            t("OAI22", "!((A1 + A2) * (B1 + B2))", &["A1", "A2", "B1", "B2"], &["xp33", "xp5", "x1"]),
            t("AO211", "(A1 * A2) + B + C", &["A1", "A2", "B", "C"], &["x2"]),
            t("AOI211", "!((A1 * A2) + B + C)", &["A1", "A2", "B", "C"], &["xp5", "x1"]),
            t("OA211", "(A1 + A2) * B * C", &["A1", "A2", "B", "C"], &["x2"]),
            t("OAI211", "!((A1 + A2) * B * C)", &["A1", "A2", "B", "C"], &["xp5"]),
            t("A2O1A1I", "!(((A1 * A2) + B) * C)", &["A1", "A2", "B", "C"], &["xp33"]),
            t("O2A1O1I", "!(((A1 + A2) * B) + C)", &["A1", "A2", "B", "C"], &["xp33"]),
            t("MAJ", "(A * B) + (A * C) + (B * C)", &["A", "B", "C"], &["x2"]),
            t("MAJI", "!((A * B) + (A * C) + (B * C))", &["A", "B", "C"], &["xp5"]),
            t("AO222", "(A1 * A2) + (B1 * B2) + (C1 * C2)", &["A1", "A2", "B1", "B2", "C1", "C2"], &["x2"]),
            t("AOI222", "!((A1 * A2) + (B1 * B2) + (C1 * C2))", &["A1", "A2", "B1", "B2", "C1", "C2"], &["xp33"]),
        ];
        Self {
            library_name: "asap7_like".into(),
            types,
            slew_index: SLEWS.to_vec(),
            load_index: LOADS.to_vec(),
            with_sequential: true,
            seed: 11,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.types.iter().map(|t| t.strengths.len()).sum::<usize>() + usize::from(self.with_sequential)
    }
}

fn parse_strength(s: &str) -> f64 {
    let body = s.trim_start_matches('x').trim_end_matches(|c: char| c.is_ascii_alphabetic());
    if let Some(frac) = body.strip_prefix('p') {
        return format!("0.{frac}").parse().unwrap_or(1.0);
    }
    body.replacen('p', ".", 1).parse().unwrap_or(1.0)
}

fn fmt_row(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
}

struct ArcModel {
    intrinsic: f64,
    effort: f64,
    slew_gain: f64,
}

impl ArcModel {
    fn eval(&self, slew: f64, load: f64, strength: f64) -> f64 {
        self.intrinsic + self.effort * load / strength + self.slew_gain * slew
    }
}

/// Renders the library as Liberty text.
pub fn synth_liberty(spec: &SynthSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = String::new();
    let idx = |v: &[f64]| fmt_row(v.iter().copied());
    let _ = writeln!(out, "library ({}) {{", spec.library_name);
    let _ = writeln!(out, "  time_unit : \"1ps\";");
    let _ = writeln!(out, "  capacitive_load_unit (1, ff);");
    let _ = writeln!(out, "  delay_model : table_lookup;");
    let n1 = spec.slew_index.len();
    let n2 = spec.load_index.len();
    for kind in ["lu_table_template", "power_lut_template"] {
        let var1 = if kind == "lu_table_template" { "input_net_transition" } else { "input_transition_time" };
        let _ = writeln!(out, "  {kind} (tmpl_{n1}x{n2}) {{");
        let _ = writeln!(out, "    variable_1 : {var1};");
        let _ = writeln!(out, "    variable_2 : total_output_net_capacitance;");
        let _ = writeln!(out, "    index_1 (\"{}\");", idx(&spec.slew_index));
        let _ = writeln!(out, "    index_2 (\"{}\");", idx(&spec.load_index));
        let _ = writeln!(out, "  }}");
    }
    let tmpl = format!("tmpl_{n1}x{n2}");

    for ty in &spec.types {
        let n = ty.pins.len() as f64;
        let stages = if ty.inverting() { 1.0 } else { 2.0 };
        // series stacks: AND-like functions stack nMOS, OR-like stack pMOS
        let and_like = ty.function.contains('*') as u8 as f64;
        let or_like = ty.function.contains('+') as u8 as f64;
        let xor_like = ty.function.contains('^') as u8 as f64;
        for s in &ty.strengths {
            let strength = parse_strength(s);
            let cell_name = format!("{}{}_ASAP7_75t_R", ty.name, s);
            let jitter: f64 = rng.gen_range(0.97..1.03);
            let _ = writeln!(out, "  cell ({cell_name}) {{");
            let _ = writeln!(out, "    area : {:.4};", 0.04 * strength * (1.0 + n));
            for p in &ty.pins {
                let _ = writeln!(out, "    pin ({p}) {{");
                let _ = writeln!(out, "      direction : input;");
                let _ = writeln!(out, "      capacitance : {:.4};", 0.5 * strength.sqrt() * (1.0 + 0.2 * n));
                let _ = writeln!(out, "    }}");
            }
            let _ = writeln!(out, "    pin (Y) {{");
            let _ = writeln!(out, "      direction : output;");
            let _ = writeln!(out, "      function : \"({})\";", ty.function);
            for (pi, p) in ty.pins.iter().enumerate() {
                let pos = 1.0 + 0.12 * pi as f64;
                let base = stages * 7.0 + 3.0 * n + 9.0 * xor_like;
                let effort = 4.2 * (1.0 + 0.15 * n) * pos * jitter;
                let rise = ArcModel {
                    intrinsic: base * (1.0 + 0.25 * or_like) * pos,
                    effort: effort * (1.0 + 0.3 * or_like),
                    slew_gain: 0.22 / stages,
                };
                let fall = ArcModel {
                    intrinsic: base * (1.0 + 0.25 * and_like) * pos,
                    effort: effort * (1.0 + 0.3 * and_like),
                    slew_gain: 0.18 / stages,
                };
                let rise_tr = ArcModel {
                    intrinsic: 4.0 + 1.5 * n * (1.0 + 0.2 * or_like),
                    effort: 8.0 * (1.0 + 0.2 * or_like) * jitter,
                    slew_gain: 0.12 / (stages * stages),
                };
                let fall_tr = ArcModel {
                    intrinsic: 3.5 + 1.5 * n * (1.0 + 0.2 * and_like),
                    effort: 6.5 * (1.0 + 0.2 * and_like) * jitter,
                    slew_gain: 0.10 / (stages * stages),
                };
                let rise_pw = ArcModel {
                    intrinsic: 0.6 * strength * (1.0 + 0.1 * n) * stages * pos,
                    effort: 0.015 * strength,
                    slew_gain: 0.004 * strength,
                };
                let fall_pw = ArcModel {
                    intrinsic: 0.5 * strength * (1.0 + 0.12 * n) * stages * pos,
                    effort: 0.012 * strength,
                    slew_gain: 0.005 * strength,
                };
                let table = |m: &ArcModel| {
                    spec.slew_index
                        .iter()
                        .map(|&sl| {
                            format!("\"{}\"", fmt_row(spec.load_index.iter().map(|&ld| m.eval(sl, ld, strength))))
                        })
                        .collect::<Vec<_>>()
                        .join(", \\\n            ")
                };
                let _ = writeln!(out, "      timing () {{");
                let _ = writeln!(out, "        related_pin : \"{p}\";");
                let _ = writeln!(
                    out,
                    "        timing_sense : {};",
                    if ty.inverting() { "negative_unate" } else { "positive_unate" }
                );
                for (group, m) in [
                    ("cell_rise", &rise),
                    ("cell_fall", &fall),
                    ("rise_transition", &rise_tr),
                    ("fall_transition", &fall_tr),
                ] {
                    let _ = writeln!(out, "        {group} ({tmpl}) {{");
                    let _ = writeln!(out, "          values ({});", table(m));
                    let _ = writeln!(out, "        }}");
                }
                let _ = writeln!(out, "      }}");
                let _ = writeln!(out, "      internal_power () {{");
                let _ = writeln!(out, "        related_pin : \"{p}\";");
                for (group, m) in [("rise_power", &rise_pw), ("fall_power", &fall_pw)] {
                    let _ = writeln!(out, "        {group} ({tmpl}) {{");
                    let _ = writeln!(out, "          values ({});", table(m));
                    let _ = writeln!(out, "        }}");
                }
                let _ = writeln!(out, "      }}");
            }
            let _ = writeln!(out, "    }}");
            let _ = writeln!(out, "  }}");
        }
    }

    if spec.with_sequential {
        let _ = writeln!(out, "  cell (DFFHQNx1_ASAP7_75t_R) {{");
        let _ = writeln!(out, "    ff (IQN, IQNN) {{ clocked_on : \"CLK\"; next_state : \"!D\"; }}");
        let _ = writeln!(out, "    pin (CLK) {{ direction : input; capacitance : 0.5; }}");
        let _ = writeln!(out, "    pin (D) {{ direction : input; capacitance : 0.6; }}");
        let _ = writeln!(out, "    pin (QN) {{ direction : output; function : \"IQN\"; }}");
        let _ = writeln!(out, "  }}");
    }
    let _ = writeln!(out, "}}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::parse_liberty;

    #[test]
    fn strengths_parse() {
        assert_eq!(parse_strength("x1"), 1.0);
        assert_eq!(parse_strength("xp33"), 0.33);
        assert_eq!(parse_strength("x1p5"), 1.5);
        assert_eq!(parse_strength("x16f"), 16.0);
    }

    #[test]
    fn toy_library_shape() {
        let spec = SynthSpec::toy();
        let lib = parse_liberty(&synth_liberty(&spec)).unwrap();
        assert_eq!(lib.cells.len(), 20);
        assert_eq!(lib.cell_types().len(), 8);
        for cell in lib.cells.values() {
            assert!(cell.arcs.iter().all(|a| a.is_complete()), "{}", cell.name);
        }
    }

    #[test]
    fn asap7_like_parses() {
        let spec = SynthSpec::asap7_like();
        let lib = parse_liberty(&synth_liberty(&spec)).unwrap();
        assert_eq!(lib.cells.len(), spec.cell_count());
        assert_eq!(lib.cell_types().len(), spec.types.len() + 1);
    }
}
