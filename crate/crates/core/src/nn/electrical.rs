// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Attention, AttnCache, Fcl2, FclCache};
use super::optim::{mse, Trainable};
use super::tensor::{axpy, concat, Tensor};
use super::{fcl_tensors, fcl_tensors_mut, ModelDims, NnError, ParamSet, Vocab};
use crate::liberty::{ArcId, Property};

#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalParams {
    pub cell: Tensor,
    pub pin: Tensor,
    pub property: Tensor,
    pub prop_fcl: Fcl2,
    pub attn: Attention,
    pub out_fcl: Fcl2,
    pub diff_fcl: Fcl2,
}

impl ParamSet for ElectricalParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![("cell", &self.cell), ("pin", &self.pin), ("property", &self.property)];
        v.extend(fcl_tensors(["prop.l1.w", "prop.l1.b", "prop.l2.w", "prop.l2.b"], &self.prop_fcl));
        v.extend([("attn.wq", &self.attn.wq), ("attn.wk", &self.attn.wk), ("attn.wv", &self.attn.wv)]);
        v.extend(fcl_tensors(["out.l1.w", "out.l1.b", "out.l2.w", "out.l2.b"], &self.out_fcl));
        v.extend(fcl_tensors(["diff.l1.w", "diff.l1.b", "diff.l2.w", "diff.l2.b"], &self.diff_fcl));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut v = vec![("cell", &mut self.cell), ("pin", &mut self.pin), ("property", &mut self.property)];
        v.extend(fcl_tensors_mut(["prop.l1.w", "prop.l1.b", "prop.l2.w", "prop.l2.b"], &mut self.prop_fcl));
        v.extend([("attn.wq", &mut self.attn.wq), ("attn.wk", &mut self.attn.wk), ("attn.wv", &mut self.attn.wv)]);
        v.extend(fcl_tensors_mut(["out.l1.w", "out.l1.b", "out.l2.w", "out.l2.b"], &mut self.out_fcl));
        v.extend(fcl_tensors_mut(["diff.l1.w", "diff.l1.b", "diff.l2.w", "diff.l2.b"], &mut self.diff_fcl));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcInput {
    pub cell: usize,
    pub output_pin: usize,
    pub related_pin: usize,
    pub property: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElecItem {
    Out { arc: ArcInput, target: Vec<f64> },
    Diff { a: ArcInput, b: ArcInput, target: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalModel {
    pub dims: ModelDims,
    pub vocab: Vocab,
    pub params: ElectricalParams,
}

struct EmbedCache {
    arc: ArcInput,
    prop: FclCache,
    attn: AttnCache,
}

impl ElectricalModel {
    pub fn new(vocab: Vocab, dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = dims.d;
        let bound = 1.0 / (d as f64).sqrt();
        let params = ElectricalParams {
            cell: Tensor::uniform(&[vocab.cells.len(), d], bound, &mut rng),
            pin: Tensor::uniform(&[vocab.pins.len(), d], bound, &mut rng),
            property: Tensor::uniform(&[Property::ALL.len(), d], bound, &mut rng),
            prop_fcl: Fcl2::new(2 * d, dims.hidden, d, &mut rng),
            attn: Attention::new(d, &mut rng),
            out_fcl: Fcl2::new(d, dims.out_hidden, dims.grid_len, &mut rng),
            diff_fcl: Fcl2::new(d, dims.out_hidden, dims.grid_len, &mut rng),
        };
        Self { dims, vocab, params }
    }

    pub fn input(&self, arc: &ArcId, property: Property) -> Result<ArcInput, NnError> {
        Ok(ArcInput {
            cell: self.vocab.cell(&arc.cell)?,
            output_pin: self.vocab.pin(&arc.output_pin)?,
            related_pin: self.vocab.pin(&arc.related_pin)?,
            property: property.index(),
        })
    }

    /// Starts the output layer at a given bias, typically the mean target.
    pub fn set_output_bias(&mut self, bias: &[f64]) -> Result<(), NnError> {
        let b = self.params.out_fcl.l2.b.data_mut();
        if b.len() != bias.len() {
            return Err(NnError::Shape(format!("bias of length {} for output width {}", bias.len(), b.len())));
        }
        b.copy_from_slice(bias);
        Ok(())
    }

    fn embed(&self, arc: &ArcInput) -> (Vec<f64>, EmbedCache) {
        let p = &self.params;
        let x = concat(&[p.cell.row(arc.cell), p.property.row(arc.property)]);
        let (pc, prop) = p.prop_fcl.forward(&x);
        let tokens = vec![pc.clone(), p.pin.row(arc.related_pin).to_vec(), p.pin.row(arc.output_pin).to_vec()];
        let (e, attn) = p.attn.forward(&pc, tokens);
        (e, EmbedCache { arc: *arc, prop, attn })
    }

    fn embed_backward(&self, c: &EmbedCache, de: &[f64], g: &mut ElectricalParams) {
        let (mut dpc, dtok) = self.params.attn.backward(&c.attn, de, &mut g.attn);
        axpy(&mut dpc, 1.0, &dtok[0]);
        axpy(g.pin.row_mut(c.arc.related_pin), 1.0, &dtok[1]);
        axpy(g.pin.row_mut(c.arc.output_pin), 1.0, &dtok[2]);
        let dx = self.params.prop_fcl.backward(&c.prop, &dpc, &mut g.prop_fcl);
        let d = self.dims.d;
        axpy(g.cell.row_mut(c.arc.cell), 1.0, &dx[..d]);
        axpy(g.property.row_mut(c.arc.property), 1.0, &dx[d..]);
    }

    /// The arc embedding fed to Elec-Out-FCL.
    pub fn arc_vector(&self, arc: &ArcInput) -> Vec<f64> {
        self.embed(arc).0
    }

    pub fn attention_weights(&self, arc: &ArcInput) -> Vec<f64> {
        self.embed(arc).1.attn.weights
    }

    /// Predicted log-response over the condition grid.
    pub fn forward(&self, arc: &ArcInput) -> Vec<f64> {
        let (e, _) = self.embed(arc);
        self.params.out_fcl.forward(&e).0
    }

    pub fn forward_diff(&self, a: &ArcInput, b: &ArcInput) -> Vec<f64> {
        let (ea, _) = self.embed(a);
        let (eb, _) = self.embed(b);
        let diff: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| x - y).collect();
        self.params.diff_fcl.forward(&diff).0
    }
}

impl Trainable for ElectricalModel {
    type Params = ElectricalParams;
    type Item = ElecItem;

    fn params(&self) -> &ElectricalParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ElectricalParams {
        &mut self.params
    }

    fn loss_and_grad(&self, item: &ElecItem, weight: f64, g: &mut ElectricalParams) -> f64 {
        match item {
            ElecItem::Out { arc, target } => {
                let (e, ec) = self.embed(arc);
                let (y, fc) = self.params.out_fcl.forward(&e);
                let (loss, mut dy) = mse(&y, target);
                dy.iter_mut().for_each(|v| *v *= weight);
                let de = self.params.out_fcl.backward(&fc, &dy, &mut g.out_fcl);
                self.embed_backward(&ec, &de, g);
                loss
            }
            ElecItem::Diff { a, b, target } => {
                let (ea, ca) = self.embed(a);
                let (eb, cb) = self.embed(b);
                let diff: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| x - y).collect();
                let (y, fc) = self.params.diff_fcl.forward(&diff);
                let (loss, mut dy) = mse(&y, target);
                dy.iter_mut().for_each(|v| *v *= weight);
                let dd = self.params.diff_fcl.backward(&fc, &dy, &mut g.diff_fcl);
                let neg: Vec<f64> = dd.iter().map(|v| -v).collect();
                self.embed_backward(&ca, &dd, g);
                self.embed_backward(&cb, &neg, g);
                loss
            }
        }
    }

    fn loss(&self, item: &ElecItem) -> f64 {
        match item {
            ElecItem::Out { arc, target } => mse(&self.forward(arc), target).0,
            ElecItem::Diff { a, b, target } => mse(&self.forward_diff(a, b), target).0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro(grid_len: usize) -> ElectricalModel {
        let vocab = Vocab::new(["C0", "C1", "C2"].map(String::from), ["A", "B", "C", "Y"].map(String::from));
        ElectricalModel::new(vocab, ModelDims { d: 4, hidden: 5, out_hidden: 6, grid_len }, 9)
    }

    fn arc(m: &ElectricalModel, cell: &str, rel: &str, p: Property) -> ArcInput {
        let id = ArcId { cell: cell.into(), output_pin: "Y".into(), related_pin: rel.into() };
        m.input(&id, p).unwrap()
    }

    #[test]
    fn output_width_and_determinism() {
        let m = micro(7);
        let a = arc(&m, "C1", "A", Property::FallTransition);
        let y = m.forward(&a);
        assert_eq!(y.len(), 7);
        assert_eq!(y, m.forward(&a));
        assert_eq!(m.arc_vector(&a).len(), 4);
        let w = m.attention_weights(&a);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12 && w.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn related_pin_enters_only_through_its_token() {
        let mut m = micro(3);
        let a = arc(&m, "C0", "A", Property::RiseDelay);
        let b = arc(&m, "C0", "B", Property::RiseDelay);
        assert_ne!(m.forward(&a), m.forward(&b));
        // make the two pin embeddings equal and the predictions coincide
        let (ra, rb) = (m.vocab.pin("A").unwrap(), m.vocab.pin("B").unwrap());
        let row = m.params.pin.row(ra).to_vec();
        m.params.pin.row_mut(rb).copy_from_slice(&row);
        assert_eq!(m.forward(&a), m.forward(&b));
    }

    #[test]
    fn output_bias_shape_checked() {
        let mut m = micro(3);
        assert!(m.set_output_bias(&[1.0, 2.0]).is_err());
        m.set_output_bias(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.params.out_fcl.l2.b.data(), &[1.0, 2.0, 3.0]);
    }
}
