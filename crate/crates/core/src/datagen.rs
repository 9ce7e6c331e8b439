// SPDX-License-Identifier: Apache-2.0

//! The four self-supervised datasets: output and difference prediction for
//! functional behaviour and for electrical responses.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolfn::{TruthTable, DEFAULT_INPUT_LIMIT};
use crate::liberty::{ArcId, Library, Property};
use crate::testgen::{ConditionGrid, ResponseSet};

pub const DATASET_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum DataGenError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuncOutExample {
    pub cell: String,
    pub output_pin: String,
    /// Input pins in lexicographic order with their logic values.
    pub pins: Vec<(String, bool)>,
    pub target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuncDiffExample {
    pub cell_a: String,
    pub cell_b: String,
    pub output_a: String,
    pub output_b: String,
    pub pins: Vec<(String, bool)>,
    /// Y(a) - Y(b) in {-1, 0, 1}.
    pub target: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElecOutExample {
    pub arc: ArcId,
    pub property: Property,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElecDiffExample {
    pub arc_a: ArcId,
    pub arc_b: ArcId,
    pub property: Property,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TrainingExample {
    FuncOut(FuncOutExample),
    FuncDiff(FuncDiffExample),
    ElecOut(ElecOutExample),
    ElecDiff(ElecDiffExample),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Maximum number of unordered cell pairs in FuncDiff.
    pub func_pair_cap: usize,
    /// Partners sampled per arc for ElecDiff.
    pub elec_partners: usize,
    pub seed: u64,
    pub input_limit: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { func_pair_cap: 20_000, elec_partners: 4, seed: 0, input_limit: DEFAULT_INPUT_LIMIT }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FunctionalData {
    pub out: Vec<FuncOutExample>,
    pub diff: Vec<FuncDiffExample>,
    /// Skipped cells counted by reason.
    pub skipped: BTreeMap<String, usize>,
}

struct FuncCell<'a> {
    name: &'a str,
    output: &'a str,
    table: TruthTable,
}

/// Exhaustive FuncOut examples and (possibly sampled) FuncDiff examples.
pub fn gen_functional(lib: &Library, cfg: &DataConfig) -> FunctionalData {
    let mut data = FunctionalData::default();
    let mut cells: Vec<FuncCell> = Vec::new();
    for cell in lib.cells.values() {
        let reason = if cell.is_sequential {
            Some("sequential")
        } else if cell.output_pins.len() != 1 {
            Some("multi_output")
        } else {
            None
        };
        if let Some(r) = reason {
            *data.skipped.entry(r.into()).or_default() += 1;
            continue;
        }
        let out = &cell.output_pins[0];
        let Some(f) = &out.function else {
            *data.skipped.entry("no_function".into()).or_default() += 1;
            continue;
        };
        let mut pins = cell.input_pins.clone();
        pins.sort();
        match TruthTable::from_expr(f, &pins, cfg.input_limit) {
            Ok(table) => cells.push(FuncCell { name: &cell.name, output: &out.name, table }),
            Err(_) => *data.skipped.entry("too_many_inputs".into()).or_default() += 1,
        }
    }
    for c in &cells {
        for i in 0..c.table.bits.len() {
            data.out.push(FuncOutExample {
                cell: c.name.into(),
                output_pin: c.output.into(),
                pins: c.table.assignment(i),
                target: c.table.bits[i],
            });
        }
    }
    let mut pairs = Vec::new();
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            if a.table.input_pins == b.table.input_pins {
                pairs.push((a, b));
            }
        }
    }
    let chosen: Vec<usize> = if pairs.len() <= cfg.func_pair_cap {
        (0..pairs.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut idx = index::sample(&mut rng, pairs.len(), cfg.func_pair_cap).into_vec();
        idx.sort_unstable();
        idx
    };
    for k in chosen {
        let (a, b) = pairs[k];
        for i in 0..a.table.bits.len() {
            data.diff.push(FuncDiffExample {
                cell_a: a.name.into(),
                cell_b: b.name.into(),
                output_a: a.output.into(),
                output_b: b.output.into(),
                pins: a.table.assignment(i),
                target: i8::from(a.table.bits[i]) - i8::from(b.table.bits[i]),
            });
        }
    }
    data
}

/// Electrical responses per property plus the sampled difference pairs.
///
/// Difference targets are materialized on demand from the responses so the
/// in-memory footprint stays at one vector per (arc, property).
#[derive(Debug, Clone)]
pub struct ElectricalData {
    pub grid_len: usize,
    pub responses: Vec<ResponseSet>,
    pub diff_pairs: Vec<(Property, ArcId, ArcId)>,
}

impl ElectricalData {
    pub fn out_examples(&self) -> impl Iterator<Item = ElecOutExample> + '_ {
        self.responses.iter().flat_map(|r| {
            r.vectors.iter().map(move |(id, v)| ElecOutExample {
                arc: id.clone(),
                property: r.property,
                target: v.clone(),
            })
        })
    }

    pub fn out_count(&self) -> usize {
        self.responses.iter().map(|r| r.vectors.len()).sum()
    }

    pub fn response(&self, p: Property, arc: &ArcId) -> Option<&Vec<f64>> {
        self.responses.iter().find(|r| r.property == p).and_then(|r| r.vectors.get(arc))
    }

    pub fn diff_examples(&self) -> impl Iterator<Item = ElecDiffExample> + '_ {
        self.diff_pairs.iter().map(|(p, a, b)| {
            let va = self.response(*p, a).expect("pair drawn from responses");
            let vb = self.response(*p, b).expect("pair drawn from responses");
            ElecDiffExample {
                arc_a: a.clone(),
                arc_b: b.clone(),
                property: *p,
                target: va.iter().zip(vb).map(|(x, y)| x - y).collect(),
            }
        })
    }

    pub fn is_empty(&self) -> bool {
        self.out_count() == 0
    }
}

/// ElecOut for every eligible (arc, property); ElecDiff partners sampled per arc.
pub fn gen_electrical(lib: &Library, grid: &ConditionGrid, cfg: &DataConfig) -> ElectricalData {
    let mut responses = Vec::new();
    let mut diff_pairs = Vec::new();
    for p in Property::ALL {
        let r = ResponseSet::compute(lib, grid, p);
        for (id, why) in &r.excluded {
            log::warn!("arc {id} excluded from {p}: {why}");
        }
        let ids: Vec<&ArcId> = r.vectors.keys().collect();
        let n = ids.len();
        if n >= 2 && cfg.elec_partners > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + p.index() as u64));
            let k = cfg.elec_partners.min(n - 1);
            for (i, a) in ids.iter().enumerate() {
                // sample among the other n-1 arcs
                let mut picks = index::sample(&mut rng, n - 1, k).into_vec();
                picks.sort_unstable();
                for j in picks {
                    let j = if j >= i { j + 1 } else { j };
                    diff_pairs.push((p, (*a).clone(), ids[j].clone()));
                }
            }
        }
        responses.push(r);
    }
    ElectricalData { grid_len: grid.len(), responses, diff_pairs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema: u32,
    pub config: DataConfig,
    pub grid: ConditionGrid,
    pub counts: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, usize>,
    pub library_hash: String,
    /// Electrical targets live in `elec_targets.f32` when true.
    pub sidecar: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct SidecarRef {
    offset: u64,
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct Record<T> {
    schema: u32,
    #[serde(flatten)]
    example: T,
}

/// Electrical records with targets either inline or in the sidecar.
#[derive(Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
enum ElecRecord {
    ElecOut { arc: ArcId, property: Property, target: TargetField },
    ElecDiff { arc_a: ArcId, arc_b: ArcId, property: Property, target: TargetField },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetField {
    Inline(Vec<f64>),
    Sidecar(SidecarRef),
}

pub const FILES: [&str; 4] = ["func_out.jsonl", "func_diff.jsonl", "elec_out.jsonl", "elec_diff.jsonl"];
pub const SIDECAR_FILE: &str = "elec_targets.f32";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataGenError + '_ {
    move |source| DataGenError::Io { context: path.display().to_string(), source }
}

/// Writes all four datasets plus a manifest; output is byte-stable.
pub fn write_datasets(
    dir: &Path,
    func: &FunctionalData,
    elec: &ElectricalData,
    manifest: &DatasetManifest,
) -> Result<(), DataGenError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut buf = Vec::new();
    for ex in &func.out {
        line(&mut buf, &TrainingExample::FuncOut(ex.clone()));
    }
    let path = dir.join(FILES[0]);
    crate::write_atomic(&path, &buf).map_err(io_err(&path))?;
    buf.clear();
    for ex in &func.diff {
        line(&mut buf, &TrainingExample::FuncDiff(ex.clone()));
    }
    let path = dir.join(FILES[1]);
    crate::write_atomic(&path, &buf).map_err(io_err(&path))?;

    let mut side: Vec<u8> = Vec::new();
    let mut target = |v: Vec<f64>| {
        if manifest.sidecar {
            let offset = (side.len() / 4) as u64;
            for x in &v {
                side.extend_from_slice(&(*x as f32).to_le_bytes());
            }
            TargetField::Sidecar(SidecarRef { offset, len: v.len() as u64 })
        } else {
            TargetField::Inline(v)
        }
    };
    let mut out_buf = Vec::new();
    for ex in elec.out_examples() {
        line(&mut out_buf, &ElecRecord::ElecOut { arc: ex.arc, property: ex.property, target: target(ex.target) });
    }
    let mut diff_buf = Vec::new();
    for ex in elec.diff_examples() {
        let rec =
            ElecRecord::ElecDiff { arc_a: ex.arc_a, arc_b: ex.arc_b, property: ex.property, target: target(ex.target) };
        line(&mut diff_buf, &rec);
    }
    for (name, bytes) in [(FILES[2], &out_buf), (FILES[3], &diff_buf)] {
        let path = dir.join(name);
        crate::write_atomic(&path, bytes).map_err(io_err(&path))?;
    }
    let side_path = dir.join(SIDECAR_FILE);
    if manifest.sidecar {
        crate::write_atomic(&side_path, &side).map_err(io_err(&side_path))?;
    } else if side_path.exists() {
        std::fs::remove_file(&side_path).map_err(io_err(&side_path))?;
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    crate::write_atomic(&path, &json).map_err(io_err(&path))?;
    Ok(())
}

fn line<T: Serialize>(buf: &mut Vec<u8>, example: &T) {
    serde_json::to_writer(&mut *buf, &Record { schema: DATASET_SCHEMA, example }).expect("example serializes");
    buf.push(b'\n');
}

/// Datasets as read back from disk, electrical examples materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDatasets {
    pub manifest: DatasetManifest,
    pub func_out: Vec<FuncOutExample>,
    pub func_diff: Vec<FuncDiffExample>,
    pub elec_out: Vec<ElecOutExample>,
    pub elec_diff: Vec<ElecDiffExample>,
}

impl LoadedDatasets {
    pub fn from_memory(manifest: DatasetManifest, func: &FunctionalData, elec: &ElectricalData) -> Self {
        Self {
            manifest,
            func_out: func.out.clone(),
            func_diff: func.diff.clone(),
            elec_out: elec.out_examples().collect(),
            elec_diff: elec.diff_examples().collect(),
        }
    }
}

pub fn read_datasets(dir: &Path) -> Result<LoadedDatasets, DataGenError> {
    let mpath = dir.join("manifest.json");
    let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|source| DataGenError::Json { context: mpath.display().to_string(), source })?;
    if manifest.schema != DATASET_SCHEMA {
        return Err(DataGenError::Format(format!("unsupported dataset schema {}", manifest.schema)));
    }
    let side: Vec<f64> = if manifest.sidecar {
        let p = dir.join(SIDECAR_FILE);
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        if bytes.len() % 4 != 0 {
            return Err(DataGenError::Format(format!("{}: length not a multiple of 4", p.display())));
        }
        bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect()
    } else {
        Vec::new()
    };
    let resolve = |t: TargetField| -> Result<Vec<f64>, DataGenError> {
        match t {
            TargetField::Inline(v) => Ok(v),
            TargetField::Sidecar(r) => side
                .get(r.offset as usize..(r.offset + r.len) as usize)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| DataGenError::Format(format!("sidecar range {}+{} out of bounds", r.offset, r.len))),
        }
    };
    let mut out = LoadedDatasets {
        manifest: manifest.clone(),
        func_out: vec![],
        func_diff: vec![],
        elec_out: vec![],
        elec_diff: vec![],
    };
    for name in &FILES[..2] {
        for ex in read_lines::<TrainingExample>(&dir.join(name))? {
            match ex {
                TrainingExample::FuncOut(e) => out.func_out.push(e),
                TrainingExample::FuncDiff(e) => out.func_diff.push(e),
                _ => return Err(DataGenError::Format(format!("{name}: unexpected electrical record"))),
            }
        }
    }
    for name in &FILES[2..] {
        for rec in read_lines::<ElecRecord>(&dir.join(name))? {
            match rec {
                ElecRecord::ElecOut { arc, property, target } => {
                    out.elec_out.push(ElecOutExample { arc, property, target: resolve(target)? })
                }
                ElecRecord::ElecDiff { arc_a, arc_b, property, target } => {
                    out.elec_diff.push(ElecDiffExample { arc_a, arc_b, property, target: resolve(target)? })
                }
            }
        }
    }
    Ok(out)
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DataGenError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, l) in std::io::BufReader::new(f).lines().enumerate() {
        let l = l.map_err(io_err(path))?;
        if l.trim().is_empty() {
            continue;
        }
        let rec: Record<T> = serde_json::from_str(&l)
            .map_err(|source| DataGenError::Json { context: format!("{}:{}", path.display(), i + 1), source })?;
        if rec.schema != DATASET_SCHEMA {
            return Err(DataGenError::Format(format!("{}: unsupported schema {}", path.display(), rec.schema)));
        }
        out.push(rec.example);
    }
    Ok(out)
}

/// Hash over the dataset files in a directory, in a fixed order.
pub fn dataset_hash(dir: &Path) -> Result<String, DataGenError> {
    let mut all = Vec::new();
    for name in FILES.iter().chain([&SIDECAR_FILE, &"manifest.json"]) {
        let p = dir.join(name);
        if p.exists() {
            all.write_all(name.as_bytes()).unwrap();
            all.extend(std::fs::read(&p).map_err(io_err(&p))?);
        }
    }
    Ok(crate::sha256_hex(&all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::{parse_liberty, LookupTable2D};
    use crate::synth::{synth_liberty, SynthSpec};
    use crate::testgen::{build_condition_grid, log_space};

    fn toy() -> Library {
        parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap()
    }

    fn assign(pins: &[(String, bool)], name: &str) -> bool {
        pins.iter().find(|(p, _)| p == name).unwrap().1
    }

    #[test]
    fn and2_and_xor2_examples() {
        let data = gen_functional(&toy(), &DataConfig::default());
        let and = data
            .out
            .iter()
            .find(|e| e.cell.starts_with("AND2x2") && assign(&e.pins, "A") && !assign(&e.pins, "B"))
            .unwrap();
        assert!(!and.target);
        let d = data
            .diff
            .iter()
            .find(|e| {
                e.cell_a.starts_with("AND2x2")
                    && e.cell_b.starts_with("XOR2x1")
                    && assign(&e.pins, "A")
                    && !assign(&e.pins, "B")
            })
            .unwrap();
        assert_eq!(d.target, -1);
    }

    #[test]
    fn coverage_and_label_consistency() {
        let lib = toy();
        let data = gen_functional(&lib, &DataConfig::default());
        // 4 + 2 one-input cells, 14 two-input cells
        assert_eq!(data.out.len(), 6 * 2 + 14 * 4);
        let lookup: BTreeMap<(String, Vec<(String, bool)>), bool> =
            data.out.iter().map(|e| ((e.cell.clone(), e.pins.clone()), e.target)).collect();
        for e in &data.diff {
            let a = lookup[&(e.cell_a.clone(), e.pins.clone())];
            let b = lookup[&(e.cell_b.clone(), e.pins.clone())];
            assert_eq!(e.target, i8::from(a) - i8::from(b));
        }
        // pairs: C(6,2) one-input plus C(14,2) two-input, each over all assignments
        assert_eq!(data.diff.len(), 15 * 2 + 91 * 4);
    }

    #[test]
    fn self_pair_is_zero() {
        let lib = toy();
        let cell = &lib.cells["NAND2xp5_ASAP7_75t_R"];
        let f = cell.single_output_function().unwrap();
        let t = TruthTable::from_expr(f, &cell.input_pins, 10).unwrap();
        for i in 0..t.bits.len() {
            assert_eq!(i8::from(t.bits[i]) - i8::from(t.bits[i]), 0);
        }
        let grid = build_condition_grid(&lib, 4, 4).unwrap();
        let data = gen_electrical(&lib, &grid, &DataConfig::default());
        let v = data.out_examples().next().unwrap().target;
        assert!(v.iter().zip(&v).all(|(a, b)| a - b == 0.0));
    }

    #[test]
    fn electrical_coverage_and_diffs() {
        let lib = toy();
        let grid = build_condition_grid(&lib, 5, 5).unwrap();
        let data = gen_electrical(&lib, &grid, &DataConfig::default());
        assert_eq!(data.out_count(), lib.arc_count() * 6);
        for ex in data.out_examples() {
            assert_eq!(ex.target.len(), 25);
            assert!(ex.target.iter().all(|v| v.is_finite()));
        }
        assert_eq!(data.diff_pairs.len(), lib.arc_count() * 6 * 4);
        for ex in data.diff_examples() {
            assert_ne!(ex.arc_a, ex.arc_b);
            let a = data.response(ex.property, &ex.arc_a).unwrap();
            let b = data.response(ex.property, &ex.arc_b).unwrap();
            for k in 0..a.len() {
                assert_eq!(ex.target[k], a[k] - b[k]);
            }
        }
    }

    #[test]
    fn scaled_pair_difference_is_log_alpha() {
        let t = LookupTable2D::new(vec![1.0, 4.0], vec![1.0, 2.0, 8.0], vec![1.0, 2.0, 3.5, 2.5, 4.0, 7.0]).unwrap();
        let alpha: f64 = 2.5;
        let grid = ConditionGrid::from_points(log_space(1.0, 4.0, 6), log_space(1.0, 8.0, 6));
        let a = crate::testgen::response_vector(&t.scaled(alpha), &grid).unwrap();
        let b = crate::testgen::response_vector(&t, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y - alpha.ln()).abs() < 1e-12);
        }
    }

    fn manifest(lib: &Library, grid: &ConditionGrid, sidecar: bool) -> DatasetManifest {
        DatasetManifest {
            schema: DATASET_SCHEMA,
            config: DataConfig::default(),
            grid: grid.clone(),
            counts: BTreeMap::new(),
            skipped: BTreeMap::new(),
            library_hash: crate::library_hash(lib),
            sidecar,
        }
    }

    #[test]
    fn write_read_roundtrip_and_determinism() {
        let lib = toy();
        let grid = build_condition_grid(&lib, 3, 3).unwrap();
        let cfg = DataConfig { seed: 5, ..Default::default() };
        let func = gen_functional(&lib, &cfg);
        let elec = gen_electrical(&lib, &grid, &cfg);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m = manifest(&lib, &grid, false);
        write_datasets(d1.path(), &func, &elec, &m).unwrap();
        let elec2 = gen_electrical(&lib, &grid, &cfg);
        write_datasets(d2.path(), &gen_functional(&lib, &cfg), &elec2, &m).unwrap();
        assert_eq!(dataset_hash(d1.path()).unwrap(), dataset_hash(d2.path()).unwrap());
        let back = read_datasets(d1.path()).unwrap();
        assert_eq!(back, LoadedDatasets::from_memory(m, &func, &elec));
        let first = std::fs::read_to_string(d1.path().join("func_out.jsonl")).unwrap();
        assert!(first.starts_with("{\"schema\":1,\"task\":\"func_out\",\"cell\":"));
    }

    #[test]
    fn sidecar_roundtrip_is_f32() {
        let lib = toy();
        let grid = build_condition_grid(&lib, 3, 3).unwrap();
        let cfg = DataConfig::default();
        let func = gen_functional(&lib, &cfg);
        let elec = gen_electrical(&lib, &grid, &cfg);
        let dir = tempfile::tempdir().unwrap();
        write_datasets(dir.path(), &func, &elec, &manifest(&lib, &grid, true)).unwrap();
        let back = read_datasets(dir.path()).unwrap();
        assert_eq!(back.elec_out.len(), elec.out_count());
        for (a, b) in back.elec_out.iter().zip(elec.out_examples()) {
            for (x, y) in a.target.iter().zip(&b.target) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }
}
