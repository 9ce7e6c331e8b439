// SPDX-License-Identifier: Apache-2.0

//! Derives cell-type keys from cell names by stripping library and
//! drive-strength suffixes.

use regex::Regex;

use super::LibertyError;

/// Ordered list of patterns; each match is removed from the name in turn.
#[derive(Debug, Clone)]
pub struct CellNamer {
    rules: Vec<Regex>,
}

/// Strips `_ASAP7_75t_R`-style library tags, then drive strengths such as
/// `x2`, `xp33`, `x5p33` or `x12f`.
pub const DEFAULT_RULES: &[&str] = &[r"_ASAP7_[A-Za-z0-9]+_[A-Za-z]+$", r"x(p)?[0-9]+(p[0-9]+)?[a-z]*$"];

impl Default for CellNamer {
    fn default() -> Self {
        Self::new(DEFAULT_RULES).expect("default naming rules compile")
    }
}

impl CellNamer {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self, LibertyError> {
        let rules = patterns
            .iter()
            .map(|p| {
                Regex::new(p.as_ref()).map_err(|e| LibertyError::Naming(format!("bad rule '{}': {e}", p.as_ref())))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    pub fn cell_type_of(&self, name: &str) -> Result<String, LibertyError> {
        let mut key = name.to_string();
        for rule in &self.rules {
            key = rule.replace(&key, "").into_owned();
        }
        if key.is_empty() {
            return Err(LibertyError::Naming(format!("cell name '{name}' yields an empty type key")));
        }
        Ok(key)
    }
}

/// Drive strength encoded in a cell name (`x2` → 2, `xp33` → 0.33, `x5p33` → 5.33).
pub fn drive_strength(name: &str) -> Option<f64> {
    let re = Regex::new(r"x(p)?([0-9]+)(?:p([0-9]+))?[a-z]*(?:_|$)").ok()?;
    let caps = re.captures_iter(name).last()?;
    let whole = caps.get(2)?.as_str();
    if caps.get(1).is_some() {
        return format!("0.{whole}").parse().ok();
    }
    match caps.get(3) {
        Some(frac) => format!("{whole}.{}", frac.as_str()).parse().ok(),
        None => whole.parse().ok(),
    }
}
