// SPDX-License-Identifier: Apache-2.0

use rand::Rng;

use super::tensor::{axpy, dot, softmax, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn new<R: Rng>(inp: usize, out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inp as f64).sqrt();
        Self { w: Tensor::uniform(&[out, inp], bound, rng), b: Tensor::uniform(&[out], bound, rng) }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        axpy(&mut y, 1.0, self.b.data());
        y
    }

    /// Accumulates parameter gradients into `g`; returns dL/dx.
    pub fn backward(&self, x: &[f64], dy: &[f64], g: &mut Linear) -> Vec<f64> {
        g.w.add_outer(dy, x);
        axpy(g.b.data_mut(), 1.0, dy);
        self.w.matvec_t(dy)
    }
}

/// Two fully connected layers with a tanh in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Fcl2 {
    pub l1: Linear,
    pub l2: Linear,
}

pub struct FclCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
}

impl Fcl2 {
    pub fn new<R: Rng>(inp: usize, hidden: usize, out: usize, rng: &mut R) -> Self {
        Self { l1: Linear::new(inp, hidden, rng), l2: Linear::new(hidden, out, rng) }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, FclCache) {
        let h: Vec<f64> = self.l1.forward(x).into_iter().map(f64::tanh).collect();
        let y = self.l2.forward(&h);
        (y, FclCache { x: x.to_vec(), h })
    }

    pub fn backward(&self, c: &FclCache, dy: &[f64], g: &mut Fcl2) -> Vec<f64> {
        let dh = self.l2.backward(&c.h, dy, &mut g.l2);
        let dpre: Vec<f64> = dh.iter().zip(&c.h).map(|(d, h)| d * (1.0 - h * h)).collect();
        self.l1.backward(&c.x, &dpre, &mut g.l1)
    }
}

/// Single-head scaled dot-product attention with one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
}

pub struct AttnCache {
    pub qsrc: Vec<f64>,
    pub tokens: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Attention {
    pub fn new<R: Rng>(d: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        Self {
            wq: Tensor::uniform(&[d, d], bound, rng),
            wk: Tensor::uniform(&[d, d], bound, rng),
            wv: Tensor::uniform(&[d, d], bound, rng),
        }
    }

    fn scale(&self) -> f64 {
        1.0 / (self.wq.rows() as f64).sqrt()
    }

    pub fn forward(&self, qsrc: &[f64], tokens: Vec<Vec<f64>>) -> (Vec<f64>, AttnCache) {
        let q = self.wq.matvec(qsrc);
        let keys: Vec<Vec<f64>> = tokens.iter().map(|t| self.wk.matvec(t)).collect();
        let values: Vec<Vec<f64>> = tokens.iter().map(|t| self.wv.matvec(t)).collect();
        let s = self.scale();
        let scores: Vec<f64> = keys.iter().map(|k| dot(&q, k) * s).collect();
        let weights = softmax(&scores);
        let mut out = vec![0.0; q.len()];
        for (a, v) in weights.iter().zip(&values) {
            axpy(&mut out, *a, v);
        }
        (out, AttnCache { qsrc: qsrc.to_vec(), tokens, q, keys, values, weights })
    }

    /// Returns (dL/dqsrc, dL/dtokens).
    pub fn backward(&self, c: &AttnCache, dout: &[f64], g: &mut Attention) -> (Vec<f64>, Vec<Vec<f64>>) {
        let s = self.scale();
        let da: Vec<f64> = c.values.iter().map(|v| dot(dout, v)).collect();
        let mean: f64 = c.weights.iter().zip(&da).map(|(a, d)| a * d).sum();
        let ds: Vec<f64> = c.weights.iter().zip(&da).map(|(a, d)| a * (d - mean)).collect();
        let mut dq = vec![0.0; c.q.len()];
        let mut dtokens = Vec::with_capacity(c.tokens.len());
        #[allow(clippy::needless_range_loop)] // j indexes five parallel arrays
        for j in 0..c.tokens.len() {
            axpy(&mut dq, ds[j] * s, &c.keys[j]);
            let dk: Vec<f64> = c.q.iter().map(|q| q * ds[j] * s).collect();
            let dv: Vec<f64> = dout.iter().map(|d| d * c.weights[j]).collect();
            g.wk.add_outer(&dk, &c.tokens[j]);
            g.wv.add_outer(&dv, &c.tokens[j]);
            let mut dt = self.wk.matvec_t(&dk);
            axpy(&mut dt, 1.0, &self.wv.matvec_t(&dv));
            dtokens.push(dt);
        }
        g.wq.add_outer(&dq, &c.qsrc);
        (self.wq.matvec_t(&dq), dtokens)
    }
}
