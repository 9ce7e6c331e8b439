// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Attention, AttnCache, Fcl2, FclCache};
use super::optim::{bce_with_logits, cross_entropy, Trainable};
use super::tensor::{axpy, Tensor};
use super::{fcl_tensors, fcl_tensors_mut, ModelDims, NnError, ParamSet, Vocab};

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalParams {
    pub cell: Tensor,
    pub pin: Tensor,
    /// Rows for logic 0 and logic 1, added to input-pin tokens.
    pub value: Tensor,
    pub attn: Attention,
    pub out_fcl: Fcl2,
    pub diff_fcl: Fcl2,
}

impl ParamSet for FunctionalParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![
            ("cell", &self.cell),
            ("pin", &self.pin),
            ("value", &self.value),
            ("attn.wq", &self.attn.wq),
            ("attn.wk", &self.attn.wk),
            ("attn.wv", &self.attn.wv),
        ];
        v.extend(fcl_tensors(["out.l1.w", "out.l1.b", "out.l2.w", "out.l2.b"], &self.out_fcl));
        v.extend(fcl_tensors(["diff.l1.w", "diff.l1.b", "diff.l2.w", "diff.l2.b"], &self.diff_fcl));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut v = vec![
            ("cell", &mut self.cell),
            ("pin", &mut self.pin),
            ("value", &mut self.value),
            ("attn.wq", &mut self.attn.wq),
            ("attn.wk", &mut self.attn.wk),
            ("attn.wv", &mut self.attn.wv),
        ];
        v.extend(fcl_tensors_mut(["out.l1.w", "out.l1.b", "out.l2.w", "out.l2.b"], &mut self.out_fcl));
        v.extend(fcl_tensors_mut(["diff.l1.w", "diff.l1.b", "diff.l2.w", "diff.l2.b"], &mut self.diff_fcl));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncInput {
    pub cell: usize,
    pub output_pin: usize,
    pub pins: Vec<(usize, bool)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FuncItem {
    Out { input: FuncInput, target: bool },
    Diff { a: FuncInput, b: FuncInput, target: i8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalModel {
    pub dims: ModelDims,
    pub vocab: Vocab,
    pub params: FunctionalParams,
}

struct EmbedCache {
    input: FuncInput,
    attn: AttnCache,
}

impl FunctionalModel {
    pub fn new(vocab: Vocab, dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = dims.d;
        let bound = 1.0 / (d as f64).sqrt();
        let params = FunctionalParams {
            cell: Tensor::uniform(&[vocab.cells.len(), d], bound, &mut rng),
            pin: Tensor::uniform(&[vocab.pins.len(), d], bound, &mut rng),
            value: Tensor::uniform(&[2, d], bound, &mut rng),
            attn: Attention::new(d, &mut rng),
            out_fcl: Fcl2::new(d, dims.hidden, 1, &mut rng),
            diff_fcl: Fcl2::new(d, dims.hidden, 3, &mut rng),
        };
        Self { dims, vocab, params }
    }

    pub fn input(&self, cell: &str, output_pin: &str, pins: &[(String, bool)]) -> Result<FuncInput, NnError> {
        Ok(FuncInput {
            cell: self.vocab.cell(cell)?,
            output_pin: self.vocab.pin(output_pin)?,
            pins: pins.iter().map(|(p, v)| Ok((self.vocab.pin(p)?, *v))).collect::<Result<_, NnError>>()?,
        })
    }

    /// Learned embedding of a cell.
    pub fn cell_vector(&self, cell: &str) -> Result<&[f64], NnError> {
        Ok(self.params.cell.row(self.vocab.cell(cell)?))
    }

    fn embed(&self, input: &FuncInput) -> (Vec<f64>, EmbedCache) {
        let p = &self.params;
        let mut tokens = Vec::with_capacity(input.pins.len() + 2);
        tokens.push(p.cell.row(input.cell).to_vec());
        for (pin, v) in &input.pins {
            let mut t = p.pin.row(*pin).to_vec();
            axpy(&mut t, 1.0, p.value.row(usize::from(*v)));
            tokens.push(t);
        }
        let out_pin = p.pin.row(input.output_pin);
        tokens.push(out_pin.to_vec());
        let (e, attn) = p.attn.forward(out_pin, tokens);
        (e, EmbedCache { input: input.clone(), attn })
    }

    fn embed_backward(&self, c: &EmbedCache, de: &[f64], g: &mut FunctionalParams) {
        let (dq, dtok) = self.params.attn.backward(&c.attn, de, &mut g.attn);
        axpy(g.cell.row_mut(c.input.cell), 1.0, &dtok[0]);
        for (k, (pin, v)) in c.input.pins.iter().enumerate() {
            axpy(g.pin.row_mut(*pin), 1.0, &dtok[k + 1]);
            axpy(g.value.row_mut(usize::from(*v)), 1.0, &dtok[k + 1]);
        }
        let out = g.pin.row_mut(c.input.output_pin);
        axpy(out, 1.0, &dtok[dtok.len() - 1]);
        axpy(out, 1.0, &dq);
    }

    /// Output-pin embedding produced by the attention layer.
    pub fn output_embedding(&self, input: &FuncInput) -> Vec<f64> {
        self.embed(input).0
    }

    pub fn attention_weights(&self, input: &FuncInput) -> Vec<f64> {
        self.embed(input).1.attn.weights
    }

    /// Logit of P(output = 1).
    pub fn forward_out(&self, input: &FuncInput) -> f64 {
        let (e, _) = self.embed(input);
        self.params.out_fcl.forward(&e).0[0]
    }

    /// Logits over the differences {-1, 0, 1}.
    pub fn forward_diff(&self, a: &FuncInput, b: &FuncInput) -> Vec<f64> {
        let (ea, _) = self.embed(a);
        let (eb, _) = self.embed(b);
        let diff: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| x - y).collect();
        self.params.diff_fcl.forward(&diff).0
    }

    pub fn predict_diff(&self, a: &FuncInput, b: &FuncInput) -> i8 {
        let z = self.forward_diff(a, b);
        let k = (0..3).fold(0, |best, k| if z[k] > z[best] { k } else { best });
        k as i8 - 1
    }

    fn out_head(&self, e: &[f64]) -> (Vec<f64>, FclCache) {
        self.params.out_fcl.forward(e)
    }
}

impl Trainable for FunctionalModel {
    type Params = FunctionalParams;
    type Item = FuncItem;

    fn params(&self) -> &FunctionalParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut FunctionalParams {
        &mut self.params
    }

    fn loss_and_grad(&self, item: &FuncItem, weight: f64, g: &mut FunctionalParams) -> f64 {
        match item {
            FuncItem::Out { input, target } => {
                let (e, ec) = self.embed(input);
                let (z, fc) = self.out_head(&e);
                let (loss, dz) = bce_with_logits(z[0], *target);
                let de = self.params.out_fcl.backward(&fc, &[dz * weight], &mut g.out_fcl);
                self.embed_backward(&ec, &de, g);
                loss
            }
            FuncItem::Diff { a, b, target } => {
                let (ea, ca) = self.embed(a);
                let (eb, cb) = self.embed(b);
                let diff: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| x - y).collect();
                let (z, fc) = self.params.diff_fcl.forward(&diff);
                let (loss, dz) = cross_entropy(&z, (*target + 1) as usize);
                let dz: Vec<f64> = dz.iter().map(|v| v * weight).collect();
                let dd = self.params.diff_fcl.backward(&fc, &dz, &mut g.diff_fcl);
                let neg: Vec<f64> = dd.iter().map(|v| -v).collect();
                self.embed_backward(&ca, &dd, g);
                self.embed_backward(&cb, &neg, g);
                loss
            }
        }
    }

    fn loss(&self, item: &FuncItem) -> f64 {
        match item {
            FuncItem::Out { input, target } => bce_with_logits(self.forward_out(input), *target).0,
            FuncItem::Diff { a, b, target } => cross_entropy(&self.forward_diff(a, b), (*target + 1) as usize).0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro() -> FunctionalModel {
        let vocab = Vocab::new(["C0", "C1", "C2"].map(String::from), ["A", "B", "C", "Y"].map(String::from));
        FunctionalModel::new(vocab, ModelDims { d: 4, hidden: 5, out_hidden: 5, grid_len: 0 }, 3)
    }

    fn inp(m: &FunctionalModel, cell: &str, pins: &[(&str, bool)]) -> FuncInput {
        let pins: Vec<(String, bool)> = pins.iter().map(|(p, v)| (p.to_string(), *v)).collect();
        m.input(cell, "Y", &pins).unwrap()
    }

    #[test]
    fn attention_weights_form_a_distribution() {
        let m = micro();
        let i = inp(&m, "C1", &[("A", true), ("B", false)]);
        let w = m.attention_weights(&i);
        assert_eq!(w.len(), 4);
        assert!(w.iter().all(|a| *a >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_value_projection_ignores_attention() {
        let mut m = micro();
        m.params.attn.wv.fill(0.0);
        let i = inp(&m, "C0", &[("A", true)]);
        let before = m.forward_out(&i);
        m.params.attn.wq.data_mut().iter_mut().for_each(|v| *v *= -3.0);
        m.params.attn.wk.data_mut().iter_mut().for_each(|v| *v += 0.5);
        assert_eq!(before, m.forward_out(&i));
        // with zero embedding the logit is the FCL applied to zero
        assert_eq!(before, m.params.out_fcl.forward(&[0.0; 4]).0[0]);
    }

    #[test]
    fn self_pair_difference_is_constant() {
        let m = micro();
        let z0 = m.params.diff_fcl.forward(&[0.0; 4]).0;
        for cell in ["C0", "C1", "C2"] {
            let i = inp(&m, cell, &[("A", false), ("C", true)]);
            assert_eq!(m.forward_diff(&i, &i), z0);
        }
    }

    #[test]
    fn shared_pin_embedding_affects_every_cell() {
        let mut m = micro();
        let a = inp(&m, "C0", &[("A", true)]);
        let b = inp(&m, "C2", &[("A", false), ("B", true)]);
        let c = inp(&m, "C1", &[("B", true)]);
        let (ya, yb, yc) = (m.forward_out(&a), m.forward_out(&b), m.forward_out(&c));
        let row = m.vocab.pin("A").unwrap();
        m.params.pin.row_mut(row)[0] += 0.3;
        assert_ne!(ya, m.forward_out(&a));
        assert_ne!(yb, m.forward_out(&b));
        assert_eq!(yc, m.forward_out(&c));
    }

    #[test]
    fn unknown_tokens() {
        let m = micro();
        assert!(matches!(m.input("NOPE", "Y", &[]), Err(NnError::UnknownToken { kind: "cell", .. })));
        assert!(matches!(m.input("C0", "Q", &[]), Err(NnError::UnknownToken { kind: "pin", .. })));
    }
}
