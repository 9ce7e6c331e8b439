// SPDX-License-Identifier: Apache-2.0

//! The functional and electrical embedding models, their hand-written
//! gradients, the Adam optimizer and the checkpoint format.
//!
//! Both models attend over small token sets with a single head and use
//! two-layer fully connected heads. All arithmetic is f64; parameters are
//! rounded through f32 once training finishes so that checkpoints, which
//! store f32, reload to exactly the in-memory model.

mod checkpoint;
mod electrical;
mod functional;
pub mod gradcheck;
mod layers;
mod optim;
mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, ModelKind, CHECKPOINT_SCHEMA};
pub use electrical::{ArcInput, ElecItem, ElectricalModel, ElectricalParams};
pub use functional::{FuncInput, FuncItem, FunctionalModel, FunctionalParams};
pub use layers::{Attention, AttnCache, Fcl2, FclCache, Linear};
pub use optim::{bce_with_logits, cross_entropy, mse, train_loop, Adam, TrainConfig, Trainable};
pub use tensor::{axpy, concat, dot, softmax, Tensor};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("unknown {kind} token '{name}'")]
    UnknownToken { kind: &'static str, name: String },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Model sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Embedding size.
    pub d: usize,
    /// Hidden width of Func-Out, Diff and Property FCLs.
    pub hidden: usize,
    /// Hidden width of the electrical output and difference FCLs.
    pub out_hidden: usize,
    /// Electrical output width (grid size); unused by the functional model.
    pub grid_len: usize,
}

impl ModelDims {
    pub fn functional(d: usize) -> Self {
        Self { d, hidden: 64, out_hidden: 64, grid_len: 0 }
    }

    pub fn electrical(d: usize, grid_len: usize) -> Self {
        Self { d, hidden: 64, out_hidden: 64, grid_len }
    }
}

/// Sorted token names; rows of the embedding matrices follow this order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub cells: Vec<String>,
    pub pins: Vec<String>,
}

impl Vocab {
    pub fn new(cells: impl IntoIterator<Item = String>, pins: impl IntoIterator<Item = String>) -> Self {
        let mut cells: Vec<String> = cells.into_iter().collect();
        let mut pins: Vec<String> = pins.into_iter().collect();
        cells.sort();
        cells.dedup();
        pins.sort();
        pins.dedup();
        Self { cells, pins }
    }

    pub fn cell(&self, name: &str) -> Result<usize, NnError> {
        self.cells
            .binary_search_by(|c| c.as_str().cmp(name))
            .map_err(|_| NnError::UnknownToken { kind: "cell", name: name.into() })
    }

    pub fn pin(&self, name: &str) -> Result<usize, NnError> {
        self.pins
            .binary_search_by(|c| c.as_str().cmp(name))
            .map_err(|_| NnError::UnknownToken { kind: "pin", name: name.into() })
    }
}

/// A fixed, named list of parameter tensors.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn quantize_f32(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.quantize_f32();
        }
    }

    fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

fn fcl_tensors<'a>(prefix: [&'static str; 4], f: &'a Fcl2) -> [(&'static str, &'a Tensor); 4] {
    [(prefix[0], &f.l1.w), (prefix[1], &f.l1.b), (prefix[2], &f.l2.w), (prefix[3], &f.l2.b)]
}

fn fcl_tensors_mut<'a>(prefix: [&'static str; 4], f: &'a mut Fcl2) -> [(&'static str, &'a mut Tensor); 4] {
    [(prefix[0], &mut f.l1.w), (prefix[1], &mut f.l1.b), (prefix[2], &mut f.l2.w), (prefix[3], &mut f.l2.b)]
}
