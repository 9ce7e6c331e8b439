// SPDX-License-Identifier: Apache-2.0

//! Central finite-difference checks of the analytic gradients.

use super::{ParamSet, Trainable};

/// Denominator floor for the relative error, so entries whose true gradient
/// is zero compare on an absolute scale instead of dividing noise by noise.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares every parameter's analytic gradient of the mean item loss with
/// a central difference of step `h`.
pub fn check<M: Trainable + Clone>(model: &M, items: &[M::Item], h: f64) -> GradCheckReport {
    let w = 1.0 / items.len() as f64;
    let mut grads = model.params().zeros_like();
    for it in items {
        model.loss_and_grad(it, w, &mut grads);
    }
    let mean_loss = |m: &M| items.iter().map(|it| m.loss(it)).sum::<f64>() * w;
    let mut probe = model.clone();
    let mut report = GradCheckReport { max_rel_err: 0.0, worst_tensor: String::new(), worst_index: 0, checked: 0 };
    let names: Vec<&'static str> = grads.tensors().iter().map(|(n, _)| *n).collect();
    for (ti, name) in names.iter().enumerate() {
        let n = grads.tensors()[ti].1.len();
        for i in 0..n {
            let orig = probe.params().tensors()[ti].1.data()[i];
            set(&mut probe, ti, i, orig + h);
            let lp = mean_loss(&probe);
            set(&mut probe, ti, i, orig - h);
            let lm = mean_loss(&probe);
            set(&mut probe, ti, i, orig);
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads.tensors()[ti].1.data()[i];
            let e = rel_err(analytic, numeric);
            report.checked += 1;
            if e > report.max_rel_err {
                report.max_rel_err = e;
                report.worst_tensor = name.to_string();
                report.worst_index = i;
            }
        }
    }
    report
}

fn set<M: Trainable>(m: &mut M, tensor: usize, i: usize, v: f64) {
    let mut ts = m.params_mut().tensors_mut();
    ts[tensor].1.data_mut()[i] = v;
}
