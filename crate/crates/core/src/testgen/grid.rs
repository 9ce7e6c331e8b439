// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TestGenError;
use crate::liberty::{ArcId, Library, LookupTable2D, Property};

/// Shared (slew, load) sample applied to every arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGrid {
    pub slew_points: Vec<f64>,
    pub load_points: Vec<f64>,
}

/// `n` points spaced uniformly in log domain from `a` to `b`, endpoints exact.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    let step = (lb - la) / (n - 1) as f64;
    (0..n)
        .map(|k| match k {
            0 => a,
            k if k == n - 1 => b,
            k => (la + k as f64 * step).exp(),
        })
        .collect()
}

impl ConditionGrid {
    pub fn from_points(slew_points: Vec<f64>, load_points: Vec<f64>) -> Self {
        Self { slew_points, load_points }
    }

    pub fn len(&self) -> usize {
        self.slew_points.len() * self.load_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.slew_points.len(), self.load_points.len())
    }

    /// Condition `k` in row-major order (slew-major).
    pub fn condition(&self, k: usize) -> (f64, f64) {
        let l = self.load_points.len();
        (self.slew_points[k / l], self.load_points[k % l])
    }

    pub fn conditions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.slew_points.iter().flat_map(move |&s| self.load_points.iter().map(move |&l| (s, l)))
    }
}

/// Global breakpoint ranges over every complete arc's tables.
pub fn breakpoint_ranges(lib: &Library) -> Option<((f64, f64), (f64, f64))> {
    let mut slew = (f64::INFINITY, f64::NEG_INFINITY);
    let mut load = (f64::INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for cell in lib.cells.values() {
        for arc in cell.arcs.iter().filter(|a| a.is_complete()) {
            for t in arc.tables.values() {
                // single-point axes carry no range information
                if t.index1.len() >= 2 {
                    slew.0 = slew.0.min(t.index1[0]);
                    slew.1 = slew.1.max(*t.index1.last().unwrap());
                    any = true;
                }
                if t.index2.len() >= 2 {
                    load.0 = load.0.min(t.index2[0]);
                    load.1 = load.1.max(*t.index2.last().unwrap());
                }
            }
        }
    }
    (any && load.0.is_finite()).then_some((slew, load))
}

/// Log-uniform grid over the library's global slew and load ranges.
pub fn build_condition_grid(lib: &Library, s: usize, l: usize) -> Result<ConditionGrid, TestGenError> {
    if s < 2 || l < 2 {
        return Err(TestGenError::Config(format!("grid needs at least 2x2 points, got {s}x{l}")));
    }
    let ((s0, s1), (l0, l1)) = breakpoint_ranges(lib).ok_or(TestGenError::EmptyLibrary)?;
    if s0 <= 0.0 || l0 <= 0.0 {
        return Err(TestGenError::Config(format!(
            "breakpoint ranges must be positive for a log grid: slew [{s0}, {s1}], load [{l0}, {l1}]"
        )));
    }
    Ok(ConditionGrid { slew_points: log_space(s0, s1, s), load_points: log_space(l0, l1, l) })
}

/// Natural log of the table over every grid condition.
pub fn response_vector(table: &LookupTable2D, grid: &ConditionGrid) -> Result<Vec<f64>, TestGenError> {
    let mut out = Vec::with_capacity(grid.len());
    for (k, (s, l)) in grid.conditions().enumerate() {
        let v = table.query(s, l);
        if v <= 0.0 || !v.is_finite() {
            return Err(TestGenError::NonPositiveValue { index: k, value: v });
        }
        out.push(v.ln());
    }
    Ok(out)
}

/// Response vectors of one property for every eligible arc.
#[derive(Debug, Clone)]
pub struct ResponseSet {
    pub property: Property,
    pub vectors: BTreeMap<ArcId, Vec<f64>>,
    /// Arcs dropped because an interpolated value was not positive.
    pub excluded: Vec<(ArcId, String)>,
}

impl ResponseSet {
    pub fn compute(lib: &Library, grid: &ConditionGrid, property: Property) -> Self {
        let mut vectors = BTreeMap::new();
        let mut excluded = Vec::new();
        for cell in lib.cells.values() {
            for arc in cell.arcs.iter().filter(|a| a.is_complete()) {
                let id = cell.arc_id(arc);
                match response_vector(&arc.tables[&property], grid) {
                    Ok(v) => {
                        vectors.insert(id, v);
                    }
                    Err(e) => excluded.push((id, e.to_string())),
                }
            }
        }
        Self { property, vectors, excluded }
    }
}

/// Arcs lacking one of the six tables, reported rather than zero-filled.
pub fn incomplete_arcs(lib: &Library) -> Vec<(ArcId, Vec<Property>)> {
    lib.cells
        .values()
        .flat_map(|c| c.arcs.iter().filter(|a| !a.is_complete()).map(move |a| (c.arc_id(a), a.missing())))
        .collect()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::parse_liberty;
    use crate::synth::{synth_liberty, SynthSpec};

    #[test]
    fn grid_counts() {
        let lib = parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap();
        let g = build_condition_grid(&lib, 150, 150).unwrap();
        assert_eq!(g.len(), 22_500);
        assert_eq!(g.conditions().count(), 22_500);
        let g2 = build_condition_grid(&lib, 2, 2).unwrap();
        let corners: Vec<_> = g2.conditions().collect();
        assert_eq!(corners, vec![(5.0, 0.72), (5.0, 46.08), (320.0, 0.72), (320.0, 46.08)]);
    }

    #[test]
    fn log_spacing_closed_form() {
        // Oracle: brute-force linspace in log space, exponentiated.
        let (a, b, s) = (5.0f64, 320.0f64, 17usize);
        let pts = log_space(a, b, s);
        let mut x = a.ln();
        let dx = (b.ln() - a.ln()) / (s - 1) as f64;
        for p in &pts {
            assert!((p - x.exp()).abs() / p < 1e-12);
            x += dx;
        }
        assert_eq!(pts[0], a);
        assert_eq!(pts[s - 1], b);
        let ratios: Vec<f64> = pts.windows(2).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_errors() {
        let lib = parse_liberty("library(e) { }").unwrap();
        assert!(matches!(build_condition_grid(&lib, 4, 4), Err(TestGenError::EmptyLibrary)));
        let toy = parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap();
        assert!(matches!(build_condition_grid(&toy, 1, 4), Err(TestGenError::Config(_))));
    }

    #[test]
    fn response_constant_and_grid_points() {
        let t = LookupTable2D::constant(vec![1.0, 10.0], vec![1.0, 10.0], 3.0).unwrap();
        let g = ConditionGrid::from_points(log_space(1.0, 10.0, 5), log_space(1.0, 10.0, 4));
        let r = response_vector(&t, &g).unwrap();
        assert!(r.iter().all(|v| (v - 3.0f64.ln()).abs() < 1e-15));

        let t = LookupTable2D::new(vec![2.0, 4.0, 8.0], vec![1.0, 3.0], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = ConditionGrid::from_points(t.index1.clone(), t.index2.clone());
        let r = response_vector(&t, &g).unwrap();
        let expected: Vec<f64> = t.values.iter().map(|v| v.ln()).collect();
        assert_eq!(r, expected);
    }

    #[test]
    fn scaled_tables_shift_by_log_alpha() {
        let t = LookupTable2D::new(vec![2.0, 4.0, 8.0], vec![1.0, 3.0], vec![1.0, 2.5, 3.0, 4.0, 5.0, 6.5]).unwrap();
        let alpha = 1.7;
        let g = ConditionGrid::from_points(log_space(1.0, 10.0, 9), log_space(0.5, 5.0, 7));
        let a = response_vector(&t, &g).unwrap();
        let b = response_vector(&t.scaled(alpha), &g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - alpha.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_values_rejected() {
        let t = LookupTable2D::new(vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let g = ConditionGrid::from_points(vec![1.0, 2.0], vec![1.0, 2.0]);
        assert!(matches!(response_vector(&t, &g), Err(TestGenError::NonPositiveValue { index: 3, .. })));
    }
}
