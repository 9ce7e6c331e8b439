// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs: parse, testgen, datagen, train, eval and export, with a
//! content-hash cache so unchanged stages are skipped on rerun.
//!
//! Run directory layout:
//!
//! ```text
//! run/
//!   VERSION  run_config.json  library.json
//!   tests/   data/   model/   eval/results.json   export/*.csv
//!   .cache/<stage>.key
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::datagen::{self, DataConfig, DataGenError, DatasetManifest};
use crate::evalkit::{self, EmbeddingReport, EvalError, EvalResults, TrainSettings};
use crate::liberty::{self, CellNamer, LibertyError, Library, ParseOptions};
use crate::nn::{ElectricalModel, FunctionalModel, NnError};
use crate::synth::{synth_liberty, SynthSpec};
use crate::testgen::{build_condition_grid, ElectricalSampling, TestGenError, TestSuite};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Liberty(#[from] LibertyError),
    #[error(transparent)]
    TestGen(#[from] TestGenError),
    #[error(transparent)]
    DataGen(#[from] DataGenError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { context: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticLibrary {
    Toy,
    Asap7Like,
}

impl SyntheticLibrary {
    pub fn spec(self) -> SynthSpec {
        match self {
            Self::Toy => SynthSpec::toy(),
            Self::Asap7Like => SynthSpec::asap7_like(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub slew: usize,
    pub load: usize,
}

/// Everything a run depends on. Serialized into the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Liberty files, merged in order.
    pub libs: Vec<PathBuf>,
    /// Built-in library used when `libs` is empty.
    pub synthetic: Option<SyntheticLibrary>,
    pub out: PathBuf,
    /// Regexes stripped from cell names to form type keys; `None` keeps the defaults.
    pub cell_type_rules: Option<Vec<String>>,
    pub grid: GridDims,
    pub tests: ElectricalSampling,
    pub data: DataConfig,
    /// Store electrical targets in a binary f32 sidecar instead of inline JSON.
    pub sidecar: bool,
    pub train: TrainSettings,
    /// K values for top-K scoring.
    pub ks: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            libs: Vec::new(),
            synthetic: None,
            out: PathBuf::from("run"),
            cell_type_rules: None,
            grid: GridDims { slew: 150, load: 150 },
            tests: ElectricalSampling::default(),
            data: DataConfig::default(),
            sidecar: false,
            train: TrainSettings::default(),
            ks: vec![1, 3, 10],
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io(path))?)
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("config serializes");
        v.push(b'\n');
        v
    }

    /// Sets every seed in the config from one value.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tests.seed = seed;
        self.data.seed = seed;
        self.train.init_seed = seed;
        self.train.func.seed = seed;
        self.train.elec.seed = seed.wrapping_add(1);
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.libs.is_empty() && self.synthetic.is_none() {
            return bad("no library: set `libs` or `synthetic`");
        }
        if self.out.as_os_str().is_empty() {
            return bad("`out` is empty");
        }
        if self.grid.slew < 2 || self.grid.load < 2 {
            return bad("grid needs at least 2 points per axis");
        }
        let t = &self.train;
        if t.d == 0 || t.d_elec == 0 || t.hidden == 0 || t.out_hidden == 0 {
            return bad("embedding and hidden sizes must be positive");
        }
        for (name, c) in [("func", &t.func), ("elec", &t.elec)] {
            if c.batch_size == 0 {
                return Err(PipelineError::Config(format!("train.{name}.batch_size must be positive")));
            }
            if !(c.lr.is_finite() && c.lr > 0.0) {
                return Err(PipelineError::Config(format!("train.{name}.lr must be positive")));
            }
            if !(0.0..1.0).contains(&c.beta1) || !(0.0..1.0).contains(&c.beta2) {
                return Err(PipelineError::Config(format!("train.{name} betas must lie in [0, 1)")));
            }
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("`ks` must list positive values");
        }
        if self.data.input_limit == 0 || self.data.input_limit > 20 {
            return bad("data.input_limit must be in 1..=20");
        }
        if let Some(rules) = &self.cell_type_rules {
            CellNamer::new(rules)?;
        }
        Ok(())
    }

    fn parse_options(&self) -> Result<ParseOptions, PipelineError> {
        let namer = match &self.cell_type_rules {
            Some(r) => CellNamer::new(r)?,
            None => CellNamer::default(),
        };
        Ok(ParseOptions { namer })
    }
}

/// Parses the configured library. Synthetic libraries are written to
/// `synthetic_dir` first when given, so the run keeps its source text.
pub fn load_library(cfg: &RunConfig, synthetic_dir: Option<&Path>) -> Result<Library, PipelineError> {
    let opts = cfg.parse_options()?;
    if !cfg.libs.is_empty() {
        return Ok(liberty::parse_liberty_files(&cfg.libs, &opts)?);
    }
    let kind = cfg.synthetic.expect("validated");
    let text = synth_liberty(&kind.spec());
    if let Some(dir) = synthetic_dir {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join("synthetic.lib");
        crate::write_atomic(&path, text.as_bytes()).map_err(io(&path))?;
    }
    Ok(liberty::parse_liberty_with(&text, &opts)?)
}

/// Hash over the named files of a directory, in the given order.
pub fn hash_files(dir: &Path, names: &[&str]) -> Result<String, PipelineError> {
    let mut acc = Vec::new();
    for n in names {
        let p = dir.join(n);
        if !p.exists() {
            continue;
        }
        let bytes = std::fs::read(&p).map_err(io(&p))?;
        acc.extend_from_slice(n.as_bytes());
        acc.extend_from_slice(crate::sha256_hex(&bytes).as_bytes());
    }
    Ok(crate::sha256_hex(&acc))
}

pub const TEST_FILES: [&str; 4] = ["inverting.jsonl", "funsim.jsonl", "electrical.jsonl", "manifest.json"];
pub const MODEL_FILES: [&str; 5] =
    ["functional.json", "functional.ckpt", "electrical.json", "electrical.ckpt", "report.json"];

/// Outputs of the train stage: checkpoints plus the embedding report.
pub fn write_model_dir(dir: &Path, t: &evalkit::Trained) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    t.functional.save(&dir.join("functional.json"))?;
    match &t.electrical {
        Some(e) => {
            e.save(&dir.join("electrical.json"))?;
        }
        None => {
            for f in ["electrical.json", "electrical.ckpt"] {
                let p = dir.join(f);
                if p.exists() {
                    std::fs::remove_file(&p).map_err(io(&p))?;
                }
            }
        }
    }
    let path = dir.join("report.json");
    crate::write_atomic(&path, &t.report.to_json_bytes()).map_err(io(&path))?;
    Ok(())
}

/// Resolves a checkpoint argument (model directory or a file inside it).
pub fn model_dir(checkpoint: &Path) -> PathBuf {
    if checkpoint.is_dir() {
        checkpoint.to_path_buf()
    } else {
        checkpoint.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    }
}

/// Reads the report of a model directory and checks it against the
/// functional checkpoint stored beside it.
pub fn read_report(checkpoint: &Path) -> Result<EmbeddingReport, PipelineError> {
    let dir = model_dir(checkpoint);
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    let report: EmbeddingReport = serde_json::from_str(&text)
        .map_err(|source| PipelineError::Json { context: path.display().to_string(), source })?;
    let fpath = dir.join("functional.json");
    if fpath.exists() {
        let m = FunctionalModel::load(&fpath)?;
        if m.dims.d != report.d {
            return Err(EvalError::DimensionMismatch(format!(
                "checkpoint has d={}, report has d={}",
                m.dims.d, report.d
            ))
            .into());
        }
    }
    Ok(report)
}

pub fn load_electrical(checkpoint: &Path) -> Result<Option<ElectricalModel>, PipelineError> {
    let p = model_dir(checkpoint).join("electrical.json");
    if p.exists() {
        Ok(Some(ElectricalModel::load(&p)?))
    } else {
        Ok(None)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut v = serde_json::to_vec_pretty(value).expect("value serializes");
    v.push(b'\n');
    crate::write_atomic(path, &v).map_err(io(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub out: PathBuf,
    pub stages: Vec<StageOutcome>,
    pub results: EvalResults,
}

struct Cache {
    dir: PathBuf,
}

impl Cache {
    fn key_path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.key"))
    }

    fn fresh(&self, stage: &str, key: &str, outputs: &[PathBuf]) -> bool {
        std::fs::read_to_string(self.key_path(stage)).is_ok_and(|k| k == key) && outputs.iter().all(|p| p.exists())
    }

    fn store(&self, stage: &str, key: &str) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let p = self.key_path(stage);
        crate::write_atomic(&p, key.as_bytes()).map_err(io(&p))
    }
}

fn key(parts: serde_json::Value) -> String {
    crate::sha256_hex(json!({ "version": VERSION, "inputs": parts }).to_string().as_bytes())
}

/// Runs every stage, skipping those whose inputs are unchanged.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineSummary, PipelineError> {
    cfg.validate()?;
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).map_err(io(&out))?;
    let p = out.join("VERSION");
    crate::write_atomic(&p, format!("{VERSION}\n").as_bytes()).map_err(io(&p))?;
    let p = out.join("run_config.json");
    crate::write_atomic(&p, &cfg.to_json_bytes()).map_err(io(&p))?;
    let cache = Cache { dir: out.join(".cache") };
    let mut stages = Vec::new();

    // parse
    let lib = load_library(cfg, Some(&out.join("library")))?;
    for w in &lib.warnings {
        log::info!("{w}");
    }
    let lib_hash = crate::library_hash(&lib);
    let lib_json = out.join("library.json");
    let k = key(json!({ "library": lib_hash }));
    let cached = cache.fresh("parse", &k, std::slice::from_ref(&lib_json));
    if !cached {
        write_json(&lib_json, &lib.to_json())?;
        cache.store("parse", &k)?;
    }
    stages.push(StageOutcome { stage: "parse", cached });

    // testgen
    let grid = build_condition_grid(&lib, cfg.grid.slew, cfg.grid.load)?;
    let tests_dir = out.join("tests");
    let k = key(json!({ "library": lib_hash, "grid": cfg.grid, "tests": cfg.tests, "d": cfg.train.d }));
    let cached = cache.fresh("testgen", &k, &[tests_dir.join("manifest.json")]);
    let suite = if cached {
        TestSuite::read_dir(&tests_dir)?
    } else {
        log::info!("generating regularity tests");
        let mut suite = TestSuite::generate(&lib, &grid, &cfg.tests);
        suite.manifest.embedding_dim = Some(cfg.train.d);
        suite.write_dir(&tests_dir)?;
        cache.store("testgen", &k)?;
        suite
    };
    stages.push(StageOutcome { stage: "testgen", cached });

    // datagen
    let data_dir = out.join("data");
    let k = key(json!({ "library": lib_hash, "grid": cfg.grid, "data": cfg.data, "sidecar": cfg.sidecar }));
    let cached = cache.fresh("datagen", &k, &[data_dir.join("manifest.json")]);
    if !cached {
        log::info!("generating training datasets");
        generate_datasets(&lib, &grid, &cfg.data, cfg.sidecar, &data_dir)?;
        cache.store("datagen", &k)?;
    }
    stages.push(StageOutcome { stage: "datagen", cached });

    // train
    let model = out.join("model");
    let dataset_hash = datagen::dataset_hash(&data_dir)?;
    let k = key(json!({ "dataset": dataset_hash, "train": cfg.train }));
    let cached = cache.fresh("train", &k, &[model.join("report.json"), model.join("functional.json")]);
    let report = if cached {
        read_report(&model)?
    } else {
        log::info!("training");
        let data = datagen::read_datasets(&data_dir)?;
        let trained = evalkit::train(&lib, &data, &cfg.train, &dataset_hash)?;
        write_model_dir(&model, &trained)?;
        cache.store("train", &k)?;
        trained.report
    };
    stages.push(StageOutcome { stage: "train", cached });

    // eval
    let eval_path = out.join("eval").join("results.json");
    let tests_hash = hash_files(&tests_dir, &TEST_FILES)?;
    let k = key(json!({ "report": report.hash(), "tests": tests_hash, "ks": cfg.ks }));
    let cached = cache.fresh("eval", &k, std::slice::from_ref(&eval_path));
    let results = if cached {
        let text = std::fs::read_to_string(&eval_path).map_err(io(&eval_path))?;
        serde_json::from_str(&text)
            .map_err(|source| PipelineError::Json { context: eval_path.display().to_string(), source })?
    } else {
        let r = evalkit::evaluate(&report, &suite, &cfg.ks)?;
        let dir = out.join("eval");
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        write_json(&eval_path, &r)?;
        cache.store("eval", &k)?;
        r
    };
    stages.push(StageOutcome { stage: "eval", cached });

    // export
    let export_dir = out.join("export");
    let k = key(json!({ "report": report.hash() }));
    let cached = cache.fresh("export", &k, &[export_dir.join("functional_types.csv")]);
    if !cached {
        evalkit::export_vectors(&report, &export_dir)?;
        cache.store("export", &k)?;
    }
    stages.push(StageOutcome { stage: "export", cached });

    Ok(PipelineSummary { out, stages, results })
}

/// Builds and writes both dataset families.
pub fn generate_datasets(
    lib: &Library,
    grid: &crate::testgen::ConditionGrid,
    cfg: &DataConfig,
    sidecar: bool,
    dir: &Path,
) -> Result<DatasetManifest, PipelineError> {
    let func = datagen::gen_functional(lib, cfg);
    let elec = datagen::gen_electrical(lib, grid, cfg);
    let mut counts = std::collections::BTreeMap::new();
    counts.insert("func_out".to_string(), func.out.len());
    counts.insert("func_diff".to_string(), func.diff.len());
    counts.insert("elec_out".to_string(), elec.out_count());
    counts.insert("elec_diff".to_string(), elec.diff_pairs.len());
    let manifest = DatasetManifest {
        schema: datagen::DATASET_SCHEMA,
        config: cfg.clone(),
        grid: grid.clone(),
        counts,
        skipped: func.skipped.clone(),
        library_hash: crate::library_hash(lib),
        sidecar,
    };
    datagen::write_datasets(dir, &func, &elec, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(out: &Path) -> RunConfig {
        let mut cfg = RunConfig {
            synthetic: Some(SyntheticLibrary::Toy),
            out: out.to_path_buf(),
            grid: GridDims { slew: 3, load: 3 },
            ..RunConfig::default()
        }
        .with_seed(4);
        cfg.train.d = 4;
        cfg.train.d_elec = 4;
        cfg.train.hidden = 8;
        cfg.train.out_hidden = 8;
        cfg.train.func.epochs = 2;
        cfg.train.elec.epochs = 2;
        cfg.train.func.batch_size = 16;
        cfg.train.elec.batch_size = 16;
        cfg
    }

    #[test]
    fn config_validation() {
        assert!(matches!(RunConfig::default().validate(), Err(PipelineError::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(dir.path());
        cfg.validate().unwrap();
        cfg.ks = vec![0];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny(dir.path());
        cfg.train.func.lr = -1.0;
        assert!(cfg.validate().is_err());
        assert!(RunConfig::from_json(r#"{"synthetic":"toy","bogus":1}"#).is_err());
        let back = RunConfig::from_json(std::str::from_utf8(&tiny(dir.path()).to_json_bytes()).unwrap()).unwrap();
        assert_eq!(back, tiny(dir.path()));
    }

    #[test]
    fn rerun_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(&dir.path().join("run"));
        let first = run_pipeline(&cfg).unwrap();
        assert!(first.stages.iter().all(|s| !s.cached));
        let second = run_pipeline(&cfg).unwrap();
        assert!(second.stages.iter().all(|s| s.cached), "{:?}", second.stages);
        assert_eq!(first.results, second.results);
        assert_eq!(std::fs::read_to_string(cfg.out.join("VERSION")).unwrap().trim(), VERSION);
        // a training change reruns train and everything after it
        let mut changed = cfg.clone();
        changed.train.func.epochs = 3;
        let third = run_pipeline(&changed).unwrap();
        let cached: Vec<bool> = third.stages.iter().map(|s| s.cached).collect();
        assert_eq!(cached, vec![true, true, true, false, false, false]);
    }
}
