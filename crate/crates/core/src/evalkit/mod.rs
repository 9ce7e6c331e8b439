// SPDX-License-Identifier: Apache-2.0

//! Training orchestration, embedding reports, scoring against regularity
//! tests, analogy queries and CSV export.

mod analysis;
mod export;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::LoadedDatasets;
use crate::liberty::{ArcId, Library, Property};
use crate::nn::{
    train_loop, ElecItem, ElectricalModel, FuncItem, FunctionalModel, ModelDims, NnError, ParamSet, TrainConfig, Vocab,
};
use crate::testgen::{
    electrical_random_baseline, inverting_random_baseline, rank_by_distance, score_electrical, score_funsim,
    score_inverting, Accuracy, ArcVectors, ElectricalScore, FunsimScore, ScoreError, TestSuite,
};

pub use analysis::{drive_strength_ordering, pca_first_component, spearman};
pub use export::{export_vectors, read_vectors_csv, CsvVectors};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    /// Functional embedding size.
    pub d: usize,
    /// Electrical embedding size.
    pub d_elec: usize,
    pub hidden: usize,
    pub out_hidden: usize,
    pub func: TrainConfig,
    pub elec: TrainConfig,
    /// Parameter initialization seed.
    pub init_seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            d: 32,
            d_elec: 32,
            hidden: 64,
            out_hidden: 64,
            func: TrainConfig { epochs: 200, ..Default::default() },
            elec: TrainConfig { epochs: 200, ..Default::default() },
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcVectorEntry {
    pub property: Property,
    pub arc: ArcId,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub d: usize,
    pub d_elec: usize,
    pub seed: u64,
    pub func_epochs: usize,
    pub elec_epochs: usize,
    pub dataset_hash: String,
    pub settings_hash: String,
    pub func_losses: Vec<f64>,
    pub elec_losses: Vec<f64>,
    pub func_out_accuracy: f64,
    pub cell_types: BTreeMap<String, String>,
    pub cell_vectors: BTreeMap<String, Vec<f64>>,
    pub type_vectors: BTreeMap<String, Vec<f64>>,
    pub arc_vectors: Vec<ArcVectorEntry>,
}

impl EmbeddingReport {
    pub fn arc_vector_map(&self) -> ArcVectors {
        let mut out: ArcVectors = BTreeMap::new();
        for e in &self.arc_vectors {
            out.entry(e.property).or_default().insert(e.arc.clone(), e.vector.clone());
        }
        out
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("report serializes")
    }

    pub fn hash(&self) -> String {
        crate::sha256_hex(&self.to_json_bytes())
    }
}

/// Centroid of each type's member cell vectors.
pub fn type_centroids(
    cell_vectors: &BTreeMap<String, Vec<f64>>,
    cell_types: &BTreeMap<String, String>,
) -> BTreeMap<String, Vec<f64>> {
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for (cell, v) in cell_vectors {
        let Some(ty) = cell_types.get(cell) else { continue };
        let e = sums.entry(ty.clone()).or_insert_with(|| (vec![0.0; v.len()], 0));
        crate::nn::axpy(&mut e.0, 1.0, v);
        e.1 += 1;
    }
    sums.into_iter().map(|(t, (s, n))| (t, s.into_iter().map(|x| x / n as f64).collect())).collect()
}

pub fn functional_vocab(data: &LoadedDatasets) -> Vocab {
    let cells = data.func_out.iter().map(|e| e.cell.clone());
    let pins = data
        .func_out
        .iter()
        .flat_map(|e| e.pins.iter().map(|p| p.0.clone()).chain(std::iter::once(e.output_pin.clone())));
    Vocab::new(cells, pins)
}

pub fn electrical_vocab(data: &LoadedDatasets) -> Vocab {
    let cells = data.elec_out.iter().map(|e| e.arc.cell.clone());
    let pins = data.elec_out.iter().flat_map(|e| [e.arc.output_pin.clone(), e.arc.related_pin.clone()]);
    Vocab::new(cells, pins)
}

pub fn functional_items(model: &FunctionalModel, data: &LoadedDatasets) -> Result<Vec<FuncItem>, NnError> {
    let mut items = Vec::with_capacity(data.func_out.len() + data.func_diff.len());
    for e in &data.func_out {
        items.push(FuncItem::Out { input: model.input(&e.cell, &e.output_pin, &e.pins)?, target: e.target });
    }
    for e in &data.func_diff {
        items.push(FuncItem::Diff {
            a: model.input(&e.cell_a, &e.output_a, &e.pins)?,
            b: model.input(&e.cell_b, &e.output_b, &e.pins)?,
            target: e.target,
        });
    }
    Ok(items)
}

pub fn electrical_items(model: &ElectricalModel, data: &LoadedDatasets) -> Result<Vec<ElecItem>, NnError> {
    let mut items = Vec::with_capacity(data.elec_out.len() + data.elec_diff.len());
    for e in &data.elec_out {
        items.push(ElecItem::Out { arc: model.input(&e.arc, e.property)?, target: e.target.clone() });
    }
    for e in &data.elec_diff {
        items.push(ElecItem::Diff {
            a: model.input(&e.arc_a, e.property)?,
            b: model.input(&e.arc_b, e.property)?,
            target: e.target.clone(),
        });
    }
    Ok(items)
}

/// Fraction of FuncOut examples whose predicted class matches the target.
pub fn func_out_accuracy(model: &FunctionalModel, data: &LoadedDatasets) -> Result<f64, NnError> {
    if data.func_out.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for e in &data.func_out {
        let z = model.forward_out(&model.input(&e.cell, &e.output_pin, &e.pins)?);
        hits += usize::from((z > 0.0) == e.target);
    }
    Ok(hits as f64 / data.func_out.len() as f64)
}

pub struct Trained {
    pub functional: FunctionalModel,
    pub electrical: Option<ElectricalModel>,
    pub report: EmbeddingReport,
}

pub fn train_functional(data: &LoadedDatasets, s: &TrainSettings) -> Result<(FunctionalModel, Vec<f64>), NnError> {
    let dims = ModelDims { d: s.d, hidden: s.hidden, out_hidden: s.out_hidden, grid_len: 0 };
    let mut model = FunctionalModel::new(functional_vocab(data), dims, s.init_seed);
    let items = functional_items(&model, data)?;
    let losses = train_loop(&mut model, &items, &s.func, |e, l| log::info!("functional epoch {e}: loss {l:.6}"))?;
    model.params.quantize_f32();
    Ok((model, losses))
}

/// Trains the electrical model, or returns `None` when there is no data.
pub fn train_electrical(
    data: &LoadedDatasets,
    s: &TrainSettings,
) -> Result<Option<(ElectricalModel, Vec<f64>)>, NnError> {
    if data.elec_out.is_empty() {
        log::warn!("electrical dataset is empty; skipping the electrical model");
        return Ok(None);
    }
    let grid_len = data.elec_out[0].target.len();
    let dims = ModelDims { d: s.d_elec, hidden: s.hidden, out_hidden: s.out_hidden, grid_len };
    let mut model = ElectricalModel::new(electrical_vocab(data), dims, s.init_seed.wrapping_add(1));
    let mut mean = vec![0.0; grid_len];
    for e in &data.elec_out {
        crate::nn::axpy(&mut mean, 1.0 / data.elec_out.len() as f64, &e.target);
    }
    model.set_output_bias(&mean)?;
    let items = electrical_items(&model, data)?;
    let losses = train_loop(&mut model, &items, &s.elec, |e, l| log::info!("electrical epoch {e}: loss {l:.6}"))?;
    model.params.quantize_f32();
    Ok(Some((model, losses)))
}

/// Builds the report from trained models; deterministic for fixed inputs.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    lib: &Library,
    data: &LoadedDatasets,
    s: &TrainSettings,
    dataset_hash: &str,
    functional: &FunctionalModel,
    func_losses: Vec<f64>,
    electrical: Option<&ElectricalModel>,
    elec_losses: Vec<f64>,
) -> Result<EmbeddingReport, EvalError> {
    let cell_types: BTreeMap<String, String> =
        lib.cells.values().map(|c| (c.name.clone(), c.cell_type.clone())).collect();
    let cell_vectors: BTreeMap<String, Vec<f64>> = functional
        .vocab
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), functional.params.cell.row(i).to_vec()))
        .collect();
    let type_vectors = type_centroids(&cell_vectors, &cell_types);
    let mut arc_vectors = Vec::new();
    if let Some(m) = electrical {
        for e in &data.elec_out {
            arc_vectors.push(ArcVectorEntry {
                property: e.property,
                arc: e.arc.clone(),
                vector: m.arc_vector(&m.input(&e.arc, e.property)?),
            });
        }
        arc_vectors.sort_by(|a, b| (a.property, &a.arc).cmp(&(b.property, &b.arc)));
    }
    Ok(EmbeddingReport {
        d: s.d,
        d_elec: s.d_elec,
        seed: s.init_seed,
        func_epochs: s.func.epochs,
        elec_epochs: s.elec.epochs,
        dataset_hash: dataset_hash.to_string(),
        settings_hash: crate::sha256_hex(&serde_json::to_vec(s).expect("settings serialize")),
        func_losses,
        elec_losses,
        func_out_accuracy: func_out_accuracy(functional, data)?,
        cell_types,
        cell_vectors,
        type_vectors,
        arc_vectors,
    })
}

/// Trains both models and returns them with the report.
pub fn train(
    lib: &Library,
    data: &LoadedDatasets,
    s: &TrainSettings,
    dataset_hash: &str,
) -> Result<Trained, EvalError> {
    let (functional, fl) = train_functional(data, s)?;
    let elec = train_electrical(data, s)?;
    let (electrical, el) = match elec {
        Some((m, l)) => (Some(m), l),
        None => (None, Vec::new()),
    };
    let report = build_report(lib, data, s, dataset_hash, &functional, fl, electrical.as_ref(), el)?;
    Ok(Trained { functional, electrical, report })
}

/// Property-specific arc vector from a trained electrical model.
pub fn arc_vector(model: &ElectricalModel, arc: &ArcId, property: Property) -> Result<Vec<f64>, NnError> {
    Ok(model.arc_vector(&model.input(arc, property)?))
}

/// Types ranked by distance to vec(x̄) − vec(x) + vec(y), excluding the query types.
pub fn analogy(
    type_vectors: &BTreeMap<String, Vec<f64>>,
    x: &str,
    xbar: &str,
    y: &str,
) -> Result<Vec<(String, f64)>, ScoreError> {
    let get = |n: &str| type_vectors.get(n).ok_or_else(|| ScoreError::MissingVector(n.to_string()));
    let (vx, vxbar, vy) = (get(x)?, get(xbar)?, get(y)?);
    let target: Vec<f64> = vxbar.iter().zip(vx).zip(vy).map(|((a, b), c)| a - b + c).collect();
    Ok(rank_by_distance(&target, type_vectors.iter().filter(|(n, _)| *n != x && *n != xbar && *n != y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub inverting: BTreeMap<usize, f64>,
    pub funsim: f64,
    pub electrical: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResults {
    pub inverting: BTreeMap<usize, Accuracy>,
    pub funsim: FunsimScore,
    pub electrical: BTreeMap<usize, ElectricalScore>,
    pub electrical_macro: BTreeMap<usize, f64>,
    pub electrical_micro: BTreeMap<usize, f64>,
    pub baselines: Baselines,
}

/// Scores a report against a test suite at every K.
pub fn evaluate(report: &EmbeddingReport, suite: &TestSuite, ks: &[usize]) -> Result<EvalResults, EvalError> {
    if let Some(d) = suite.manifest.embedding_dim {
        if d != report.d {
            return Err(EvalError::DimensionMismatch(format!(
                "tests expect embedding size {d}, checkpoint has {}",
                report.d
            )));
        }
    }
    let arcs = report.arc_vector_map();
    let mut inverting = BTreeMap::new();
    let mut electrical = BTreeMap::new();
    let (mut macro_, mut micro) = (BTreeMap::new(), BTreeMap::new());
    let mut base_inv = BTreeMap::new();
    let mut base_el = BTreeMap::new();
    for &k in ks {
        inverting.insert(k, score_inverting(&suite.inverting, &report.type_vectors, k)?);
        base_inv.insert(k, inverting_random_baseline(report.type_vectors.len(), k));
        if !suite.electrical.is_empty() && !arcs.is_empty() {
            let s = score_electrical(&suite.electrical, &arcs, k)?;
            macro_.insert(k, s.macro_avg());
            micro.insert(k, s.micro_avg());
            electrical.insert(k, s);
        }
        base_el.insert(k, electrical_random_baseline(&suite.electrical, k));
    }
    Ok(EvalResults {
        inverting,
        funsim: score_funsim(&suite.funsim, &report.type_vectors)?,
        electrical,
        electrical_macro: macro_,
        electrical_micro: micro,
        baselines: Baselines { inverting: base_inv, funsim: 0.5, electrical: base_el },
    })
}

/// Parameter count of both models, for reporting.
pub fn parameter_count(t: &Trained) -> usize {
    t.functional.params.count() + t.electrical.as_ref().map_or(0, |e| e.params.count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(entries: &[(&str, [f64; 2])]) -> BTreeMap<String, Vec<f64>> {
        entries.iter().map(|(n, v)| (n.to_string(), v.to_vec())).collect()
    }

    #[test]
    fn centroids_are_means() {
        let cells = vecs(&[("INVx1", [1.0, 2.0]), ("INVx2", [3.0, 4.0]), ("BUFx2", [5.0, 5.0])]);
        let types: BTreeMap<String, String> =
            [("INVx1", "INV"), ("INVx2", "INV"), ("BUFx2", "BUF")].map(|(a, b)| (a.into(), b.into())).into();
        let t = type_centroids(&cells, &types);
        assert_eq!(t["INV"], vec![2.0, 3.0]);
        assert_eq!(t["BUF"], vec![5.0, 5.0]);
    }

    #[test]
    fn analogy_rankings() {
        let tv = vecs(&[
            ("BUF", [0.0, 0.0]),
            ("INV", [1.0, 0.0]),
            ("AND2", [0.0, 2.0]),
            ("NAND2", [1.0, 2.0]),
            ("OR2", [5.0, 5.0]),
        ]);
        let r = analogy(&tv, "BUF", "INV", "AND2").unwrap();
        assert_eq!(r[0].0, "NAND2");
        assert_eq!(r.len(), 2);
        // degenerate analogy ranks by distance to y
        let r = analogy(&tv, "BUF", "BUF", "AND2").unwrap();
        assert_eq!(r.iter().map(|x| x.0.as_str()).collect::<Vec<_>>(), vec!["NAND2", "INV", "OR2"]);
        assert!(matches!(analogy(&tv, "X", "INV", "AND2"), Err(ScoreError::MissingVector(_))));
    }
}
