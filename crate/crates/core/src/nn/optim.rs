// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::softmax;
use super::{NnError, ParamSet};

/// Binary cross-entropy on a logit; returns (loss, dL/dz).
pub fn bce_with_logits(z: f64, target: bool) -> (f64, f64) {
    let y = f64::from(u8::from(target));
    // softplus(z) - y z, computed stably
    let loss = z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
    let p = 1.0 / (1.0 + (-z).exp());
    (loss, p - y)
}

/// Cross-entropy over logits with a class index; returns (loss, dL/dz).
pub fn cross_entropy(z: &[f64], class: usize) -> (f64, Vec<f64>) {
    let p = softmax(z);
    let loss = -p[class].max(f64::MIN_POSITIVE).ln();
    let mut g = p;
    g[class] -= 1.0;
    (loss, g)
}

/// Mean squared error over the vector; returns (loss, dL/dpred).
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    (loss, diff.into_iter().map(|d| 2.0 * d / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay (AdamW); 0 gives plain Adam.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 256, lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<P: ParamSet> {
    m: P,
    v: P,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl<P: ParamSet> Adam<P> {
    pub fn new(params: &P, cfg: &TrainConfig) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut P, grads: &P) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps, wd) = (self.beta1, self.beta2, self.lr, self.eps, self.weight_decay);
        let ps = params.tensors_mut();
        let gs = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
            let (p, g, m, v) = (p.1.data_mut(), g.1.data(), m.1.data_mut(), v.1.data_mut());
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * ((m[i] / c1) / ((v[i] / c2).sqrt() + eps) + wd * p[i]);
            }
        }
    }
}

/// A model trainable by [`train_loop`].
pub trait Trainable {
    type Params: ParamSet;
    type Item;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;
    /// Adds `weight` times the item's gradient into `g`; returns the unweighted loss.
    fn loss_and_grad(&self, item: &Self::Item, weight: f64, g: &mut Self::Params) -> f64;
    fn loss(&self, item: &Self::Item) -> f64;
}

/// Shuffled mini-batch Adam; returns the mean loss of every epoch.
pub fn train_loop<M: Trainable>(
    model: &mut M,
    items: &[M::Item],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>, NnError> {
    let mut adam = Adam::new(model.params(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut grads = model.params().zeros_like();
    let mut history = Vec::with_capacity(cfg.epochs);
    let bs = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(bs).enumerate() {
            for (_, t) in grads.tensors_mut() {
                t.fill(0.0);
            }
            let w = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += model.loss_and_grad(&items[i], w, &mut grads);
            }
            if !batch_loss.is_finite() || grads.tensors().iter().any(|(_, t)| !t.is_finite()) {
                return Err(NnError::NonFiniteLoss { epoch, batch });
            }
            adam.step(model.params_mut(), &grads);
            total += batch_loss;
        }
        let mean = if items.is_empty() { 0.0 } else { total / items.len() as f64 };
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).0, 0.0);
        let (l, g) = cross_entropy(&[0.3, 0.3, 0.3], 1);
        assert!((l - 3.0f64.ln()).abs() < 1e-15);
        assert!((g[1] + 2.0 / 3.0).abs() < 1e-15);
        let (l, g) = bce_with_logits(0.0, true);
        assert!((l - 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(g, -0.5);
        // large logits stay finite
        assert!(bce_with_logits(800.0, false).0.is_finite());
        assert!(bce_with_logits(-800.0, true).0.is_finite());
        assert!((bce_with_logits(-800.0, true).0 - 800.0).abs() < 1e-9);
    }
}
