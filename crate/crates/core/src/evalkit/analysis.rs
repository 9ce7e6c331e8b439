// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, SymmetricEigen};

use super::EmbeddingReport;
use crate::liberty::{drive_strength, Property};

/// Coordinates of each row along the leading principal axis.
///
/// The axis sign is fixed so its largest-magnitude component is positive.
pub fn pca_first_component(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = x.transpose() * &x;
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let mut axis = eig.eigenvectors.column(k).clone_owned();
    let big = axis.iamax();
    if axis[big] < 0.0 {
        axis = -axis;
    }
    (x * axis).iter().copied().collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // tied values share their average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// |ρ| between drive strength and the first principal coordinate of one
/// family's arc vectors for a property. Returns `None` with fewer than
/// three distinct strengths.
pub fn drive_strength_ordering(report: &EmbeddingReport, family: &str, property: Property) -> Option<f64> {
    let mut strengths = Vec::new();
    let mut rows = Vec::new();
    for e in report.arc_vectors.iter().filter(|e| e.property == property) {
        if report.cell_types.get(&e.arc.cell).map(String::as_str) != Some(family) {
            continue;
        }
        if let Some(s) = drive_strength(&e.arc.cell) {
            strengths.push(s);
            rows.push(e.vector.clone());
        }
    }
    let mut distinct = strengths.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return None;
    }
    Some(spearman(&strengths, &pca_first_component(&rows)).abs())
}
