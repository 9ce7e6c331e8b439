// SPDX-License-Identifier: Apache-2.0

//! NLDM lookup tables indexed by (input slew, output load).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::LibertyError;

/// The six electrical quantities characterized per timing arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    RiseDelay,
    FallDelay,
    RiseTransition,
    FallTransition,
    RiseInternalPower,
    FallInternalPower,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::RiseDelay,
        Property::FallDelay,
        Property::RiseTransition,
        Property::FallTransition,
        Property::RiseInternalPower,
        Property::FallInternalPower,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::RiseDelay => "rise_delay",
            Property::FallDelay => "fall_delay",
            Property::RiseTransition => "rise_transition",
            Property::FallTransition => "fall_transition",
            Property::RiseInternalPower => "rise_internal_power",
            Property::FallInternalPower => "fall_internal_power",
        }
    }

    /// Liberty table group that carries this property.
    pub fn liberty_group(self) -> &'static str {
        match self {
            Property::RiseDelay => "cell_rise",
            Property::FallDelay => "cell_fall",
            Property::RiseTransition => "rise_transition",
            Property::FallTransition => "fall_transition",
            Property::RiseInternalPower => "rise_power",
            Property::FallInternalPower => "fall_power",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown property '{s}'"))
    }
}

/// A 2-D table; `values` is row-major with rows indexed by slew.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable2D {
    pub index1: Vec<f64>,
    pub index2: Vec<f64>,
    pub values: Vec<f64>,
}

fn check_axis(axis: &[f64], which: &str) -> Result<(), LibertyError> {
    if axis.is_empty() {
        return Err(LibertyError::Semantic(format!("{which} has no breakpoints")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(LibertyError::Semantic(format!("{which} has non-finite breakpoints")));
    }
    if axis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LibertyError::Semantic(format!("{which} is not strictly ascending")));
    }
    Ok(())
}

/// Locates the interval for `x` (clamped) and the weight of its upper end.
fn locate(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    // first breakpoint strictly greater than x; x lies in [axis[hi-1], axis[hi])
    let hi = axis.partition_point(|&b| b <= x);
    let lo = hi - 1;
    let t = (x - axis[lo]) / (axis[hi] - axis[lo]);
    (lo, hi, t)
}

impl LookupTable2D {
    pub fn new(index1: Vec<f64>, index2: Vec<f64>, values: Vec<f64>) -> Result<Self, LibertyError> {
        check_axis(&index1, "index_1")?;
        check_axis(&index2, "index_2")?;
        if values.len() != index1.len() * index2.len() {
            return Err(LibertyError::Semantic(format!(
                "table has {} values, expected {}x{}",
                values.len(),
                index1.len(),
                index2.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LibertyError::Semantic("table has non-finite values".into()));
        }
        Ok(Self { index1, index2, values })
    }

    pub fn constant(index1: Vec<f64>, index2: Vec<f64>, c: f64) -> Result<Self, LibertyError> {
        let n = index1.len() * index2.len();
        Self::new(index1, index2, vec![c; n])
    }

    pub fn rows(&self) -> usize {
        self.index1.len()
    }

    pub fn cols(&self) -> usize {
        self.index2.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.index2.len() + j]
    }

    /// Swaps the two axes.
    pub fn transposed(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        let mut values = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                values.push(self.at(i, j));
            }
        }
        Self { index1: self.index2.clone(), index2: self.index1.clone(), values }
    }

    /// Multiplies every value by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            index1: self.index1.clone(),
            index2: self.index2.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }

    /// Bilinear interpolation. Coordinates outside the breakpoint range are
    /// clamped to the nearest boundary; grid points return stored values exactly.
    pub fn query(&self, slew: f64, load: f64) -> f64 {
        let (i0, i1, t) = locate(&self.index1, slew);
        let (j0, j1, u) = locate(&self.index2, load);
        if t == 0.0 && u == 0.0 {
            return self.at(i0, j0);
        }
        let a = (1.0 - u) * self.at(i0, j0) + u * self.at(i0, j1);
        let b = (1.0 - u) * self.at(i1, j0) + u * self.at(i1, j1);
        (1.0 - t) * a + t * b
    }
}

/// Free-function form of [`LookupTable2D::query`].
pub fn lut_query(table: &LookupTable2D, slew: f64, load: f64) -> f64 {
    table.query(slew, load)
}
