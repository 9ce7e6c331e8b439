// SPDX-License-Identifier: Apache-2.0

//! Regularity tests derived from a library: inverting analogies, functional
//! similarity choices, and nearest-arc electrical similarity questions.

mod grid;
mod score;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolfn::{agreement_count, FunctionCatalog};
use crate::liberty::{ArcId, Library, Property};

pub use grid::{
    breakpoint_ranges, build_condition_grid, euclidean, incomplete_arcs, log_space, response_vector, ConditionGrid,
    ResponseSet,
};
pub use score::{
    electrical_random_baseline, inverting_random_baseline, rank_by_distance, score_electrical, score_funsim,
    score_inverting, Accuracy, ArcVectors, ElectricalScore, FunsimScore, ScoreError,
};

/// Version of the JSON-lines test schema.
pub const TEST_SCHEMA: u32 = 1;

/// Electrical test counts per property (rise/fall delay, rise/fall
/// transition, rise/fall internal power) for the 190-cell ASAP7 corpus.
pub const ASAP7_ELECTRICAL_COUNTS: [usize; 6] = [635, 467, 975, 858, 722, 722];

#[derive(Debug, Error)]
pub enum TestGenError {
    #[error("library has no arc with all six tables")]
    EmptyLibrary,
    #[error("non-positive interpolated value {value} at condition {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertingAnalogyTest {
    /// (X, X̄): the query relationship.
    pub given_pair: (String, String),
    pub probe: String,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSimilarityTest {
    pub anchor: String,
    /// Lexicographically smaller candidate.
    pub a: String,
    pub b: String,
    pub answer: String,
    pub difficulty: Difficulty,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricalSimilarityTest {
    pub property: Property,
    pub query_arc: ArcId,
    pub candidate_type: String,
    /// Candidate arcs sorted by (cell, output pin, related pin).
    pub candidates: Vec<ArcId>,
    /// Ground-truth distances of the log-response vectors, aligned with `candidates`.
    pub distances: Vec<f64>,
    pub answer_arc: ArcId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularityTest {
    Inverting(InvertingAnalogyTest),
    FunctionalSimilarity(FunctionalSimilarityTest),
    ElectricalSimilarity(ElectricalSimilarityTest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TestRecord {
    schema: u32,
    #[serde(flatten)]
    test: RegularityTest,
}

/// Types with at least one inverting partner, as oriented pairs.
pub fn inverting_pairs(catalog: &FunctionCatalog) -> Vec<(String, String)> {
    catalog.inverting_pairs()
}

/// One test per ordered pair of distinct inverting pairs.
pub fn generate_inverting_tests(catalog: &FunctionCatalog) -> Vec<InvertingAnalogyTest> {
    let pairs = catalog.inverting_pairs();
    let mut out = Vec::new();
    for (i, (x, xbar)) in pairs.iter().enumerate() {
        for (j, (y, ybar)) in pairs.iter().enumerate() {
            if i == j {
                continue;
            }
            // the probe must not be part of the given pair
            if y == x || y == xbar || ybar == x || ybar == xbar {
                continue;
            }
            out.push(InvertingAnalogyTest {
                given_pair: (x.clone(), xbar.clone()),
                probe: y.clone(),
                answer: ybar.clone(),
            });
        }
    }
    out
}

/// Every (anchor, {A, B}) over same-pin single-output types with a nonzero margin.
pub fn generate_funsim_tests(catalog: &FunctionCatalog) -> Vec<FunctionalSimilarityTest> {
    let mut out = Vec::new();
    for (_, group) in catalog.pin_groups() {
        for c in &group {
            let tc = catalog.truth_table(c).expect("functional type");
            let n = tc.bits.len();
            let others: Vec<&String> = group.iter().filter(|t| *t != c).collect();
            for (i, a) in others.iter().enumerate() {
                for b in &others[i + 1..] {
                    let sa = agreement_count(catalog.truth_table(a).unwrap(), tc).unwrap();
                    let sb = agreement_count(catalog.truth_table(b).unwrap(), tc).unwrap();
                    if sa == sb {
                        continue;
                    }
                    let diff = sa.abs_diff(sb);
                    let margin = diff as f64 / n as f64;
                    let difficulty = if 2 * diff >= n { Difficulty::Easy } else { Difficulty::Hard };
                    out.push(FunctionalSimilarityTest {
                        anchor: c.clone(),
                        a: (*a).clone(),
                        b: (*b).clone(),
                        answer: if sa > sb { (*a).clone() } else { (*b).clone() },
                        difficulty,
                        margin,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricalSampling {
    /// Tests per property when more pairs are eligible.
    pub cap: usize,
    /// Overrides `cap` per property, indexed like [`Property::ALL`].
    pub per_property: Option<[usize; 6]>,
    /// Candidate types need at least this many eligible arcs.
    pub min_candidate_arcs: usize,
    pub seed: u64,
}

impl Default for ElectricalSampling {
    fn default() -> Self {
        Self { cap: 1000, per_property: None, min_candidate_arcs: 2, seed: 0 }
    }
}

impl ElectricalSampling {
    fn cap_for(&self, p: Property) -> usize {
        self.per_property.map_or(self.cap, |c| c[p.index()])
    }
}

/// Matches the cell and type counts of the public ASAP7 release.
pub fn is_asap7_corpus(lib: &Library) -> bool {
    lib.cells.len() == 190 && lib.cell_types().len() == 86
}

/// Nearest candidate by ground-truth distance; ties go to the smaller arc id.
pub fn nearest_arc(query: &[f64], candidates: &[(ArcId, &[f64])]) -> Option<(ArcId, f64)> {
    let mut best: Option<(ArcId, f64)> = None;
    for (id, v) in candidates {
        let d = euclidean(query, v);
        match &best {
            Some((bid, bd)) if d > *bd || (d == *bd && id >= bid) => {}
            _ => best = Some((id.clone(), d)),
        }
    }
    best
}

/// Electrical tests for one property from precomputed responses.
pub fn electrical_tests_for(
    lib: &Library,
    responses: &ResponseSet,
    sampling: &ElectricalSampling,
) -> Vec<ElectricalSimilarityTest> {
    let property = responses.property;
    // eligible arcs grouped by cell type
    let mut by_type: BTreeMap<String, Vec<&ArcId>> = BTreeMap::new();
    for id in responses.vectors.keys() {
        let ty = &lib.cells[&id.cell].cell_type;
        by_type.entry(ty.clone()).or_default().push(id);
    }
    let candidate_types: Vec<&String> =
        by_type.iter().filter(|(_, arcs)| arcs.len() >= sampling.min_candidate_arcs.max(1)).map(|(t, _)| t).collect();
    let mut pairs: Vec<(&ArcId, &String)> = Vec::new();
    for q in responses.vectors.keys() {
        let qty = &lib.cells[&q.cell].cell_type;
        for ct in &candidate_types {
            if *ct != qty {
                pairs.push((q, ct));
            }
        }
    }
    let cap = sampling.cap_for(property);
    let chosen: Vec<usize> = if pairs.len() <= cap {
        (0..pairs.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed ^ (0x9e37_79b9 * (property.index() as u64 + 1)));
        let mut idx = index::sample(&mut rng, pairs.len(), cap).into_vec();
        idx.sort_unstable();
        idx
    };
    chosen
        .into_iter()
        .map(|k| {
            let (q, ct) = pairs[k];
            let candidates: Vec<ArcId> = by_type[ct].iter().map(|a| (*a).clone()).collect();
            let qv = &responses.vectors[q];
            let refs: Vec<(ArcId, &[f64])> =
                candidates.iter().map(|c| (c.clone(), responses.vectors[c].as_slice())).collect();
            let distances = refs.iter().map(|(_, v)| euclidean(qv, v)).collect();
            let (answer_arc, _) = nearest_arc(qv, &refs).expect("non-empty candidates");
            ElectricalSimilarityTest {
                property,
                query_arc: q.clone(),
                candidate_type: (*ct).clone(),
                candidates,
                distances,
                answer_arc,
            }
        })
        .collect()
}

/// Electrical tests for all six properties.
pub fn generate_electrical_tests(
    lib: &Library,
    grid: &ConditionGrid,
    sampling: &ElectricalSampling,
) -> Vec<ElectricalSimilarityTest> {
    Property::ALL
        .into_iter()
        .flat_map(|p| {
            let responses = ResponseSet::compute(lib, grid, p);
            electrical_tests_for(lib, &responses, sampling)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestManifest {
    pub schema: u32,
    pub seed: u64,
    pub grid: ConditionGrid,
    pub inverting: usize,
    pub funsim_easy: usize,
    pub funsim_hard: usize,
    pub electrical: BTreeMap<Property, usize>,
    pub library_hash: String,
    /// Embedding size the tests are meant to be scored at, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub inverting: Vec<InvertingAnalogyTest>,
    pub funsim: Vec<FunctionalSimilarityTest>,
    pub electrical: Vec<ElectricalSimilarityTest>,
    pub manifest: TestManifest,
}

impl TestSuite {
    pub fn generate(lib: &Library, grid: &ConditionGrid, sampling: &ElectricalSampling) -> Self {
        let catalog = FunctionCatalog::build(lib);
        let inverting = generate_inverting_tests(&catalog);
        let funsim = generate_funsim_tests(&catalog);
        let electrical = generate_electrical_tests(lib, grid, sampling);
        let mut counts = BTreeMap::new();
        for t in &electrical {
            *counts.entry(t.property).or_insert(0) += 1;
        }
        let manifest = TestManifest {
            schema: TEST_SCHEMA,
            seed: sampling.seed,
            grid: grid.clone(),
            inverting: inverting.len(),
            funsim_easy: funsim.iter().filter(|t| t.difficulty == Difficulty::Easy).count(),
            funsim_hard: funsim.iter().filter(|t| t.difficulty == Difficulty::Hard).count(),
            electrical: counts,
            library_hash: crate::library_hash(lib),
            embedding_dim: None,
        };
        Self { inverting, funsim, electrical, manifest }
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), TestGenError> {
        let io = |context: String| move |source| TestGenError::Io { context, source };
        std::fs::create_dir_all(dir).map_err(io(dir.display().to_string()))?;
        let files: [(&str, Vec<RegularityTest>); 3] = [
            ("inverting.jsonl", self.inverting.iter().cloned().map(RegularityTest::Inverting).collect()),
            ("funsim.jsonl", self.funsim.iter().cloned().map(RegularityTest::FunctionalSimilarity).collect()),
            ("electrical.jsonl", self.electrical.iter().cloned().map(RegularityTest::ElectricalSimilarity).collect()),
        ];
        for (name, tests) in files {
            let path = dir.join(name);
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &tests).map_err(io(path.display().to_string()))?;
            crate::write_atomic(&path, &buf).map_err(io(path.display().to_string()))?;
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        crate::write_atomic(&path, &json).map_err(io(path.display().to_string()))?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, TestGenError> {
        let manifest_path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|source| TestGenError::Io { context: manifest_path.display().to_string(), source })?;
        let manifest: TestManifest = serde_json::from_str(&text)
            .map_err(|source| TestGenError::Json { context: manifest_path.display().to_string(), source })?;
        if manifest.schema != TEST_SCHEMA {
            return Err(TestGenError::Config(format!("unsupported test schema {}", manifest.schema)));
        }
        let mut suite = TestSuite { inverting: vec![], funsim: vec![], electrical: vec![], manifest };
        for name in ["inverting.jsonl", "funsim.jsonl", "electrical.jsonl"] {
            let path = dir.join(name);
            let file = std::fs::File::open(&path)
                .map_err(|source| TestGenError::Io { context: path.display().to_string(), source })?;
            for test in read_jsonl(std::io::BufReader::new(file), &path)? {
                match test {
                    RegularityTest::Inverting(t) => suite.inverting.push(t),
                    RegularityTest::FunctionalSimilarity(t) => suite.funsim.push(t),
                    RegularityTest::ElectricalSimilarity(t) => suite.electrical.push(t),
                }
            }
        }
        Ok(suite)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, tests: &[RegularityTest]) -> std::io::Result<()> {
    for t in tests {
        let rec = TestRecord { schema: TEST_SCHEMA, test: t.clone() };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R, path: &Path) -> Result<Vec<RegularityTest>, TestGenError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|source| TestGenError::Io { context: path.display().to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TestRecord = serde_json::from_str(&line)
            .map_err(|source| TestGenError::Json { context: format!("{}:{}", path.display(), i + 1), source })?;
        if rec.schema != TEST_SCHEMA {
            return Err(TestGenError::Config(format!("unsupported test schema {}", rec.schema)));
        }
        out.push(rec.test);
    }
    Ok(out)
}

/// Re-derives every electrical answer by exhaustive search; returns mismatches.
pub fn verify_electrical(lib: &Library, grid: &ConditionGrid, tests: &[ElectricalSimilarityTest]) -> Vec<String> {
    let mut bad = Vec::new();
    let props: BTreeSet<Property> = tests.iter().map(|t| t.property).collect();
    for p in props {
        let responses = ResponseSet::compute(lib, grid, p);
        for t in tests.iter().filter(|t| t.property == p) {
            let Some(q) = responses.vectors.get(&t.query_arc) else {
                bad.push(format!("{}: query arc has no response", t.query_arc));
                continue;
            };
            let refs: Vec<(ArcId, &[f64])> = t
                .candidates
                .iter()
                .filter_map(|c| responses.vectors.get(c).map(|v| (c.clone(), v.as_slice())))
                .collect();
            match nearest_arc(q, &refs) {
                Some((ans, _)) if ans == t.answer_arc => {}
                other => bad.push(format!("{} {}: stored {}, recomputed {:?}", p, t.query_arc, t.answer_arc, other)),
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::parse_liberty;
    use crate::synth::{synth_liberty, SynthSpec, TypeSpec};

    fn toy_catalog() -> FunctionCatalog {
        FunctionCatalog::build(&parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap())
    }

    fn lib_from(types: Vec<TypeSpec>) -> Library {
        let spec = SynthSpec { types, ..SynthSpec::toy() };
        parse_liberty(&synth_liberty(&spec)).unwrap()
    }

    #[test]
    fn two_pairs_two_tests() {
        let lib = lib_from(vec![
            TypeSpec::new("BUF", "A", &["A"], &["x1"]),
            TypeSpec::new("INV", "!A", &["A"], &["x1"]),
            TypeSpec::new("AND2", "A * B", &["A", "B"], &["x1"]),
            TypeSpec::new("NAND2", "!(A * B)", &["A", "B"], &["x1"]),
        ]);
        let cat = FunctionCatalog::build(&lib);
        let pairs = inverting_pairs(&cat);
        assert_eq!(pairs, vec![("AND2".into(), "NAND2".into()), ("BUF".into(), "INV".into())]);
        let tests = generate_inverting_tests(&cat);
        assert_eq!(tests.len(), 2);
        assert!(tests.contains(&InvertingAnalogyTest {
            given_pair: ("BUF".into(), "INV".into()),
            probe: "AND2".into(),
            answer: "NAND2".into()
        }));
    }

    #[test]
    fn one_pair_no_tests() {
        let lib =
            lib_from(vec![TypeSpec::new("BUF", "A", &["A"], &["x1"]), TypeSpec::new("INV", "!A", &["A"], &["x1"])]);
        assert!(generate_inverting_tests(&FunctionCatalog::build(&lib)).is_empty());
    }

    #[test]
    fn inverting_count_formula() {
        let cat = toy_catalog();
        let p = inverting_pairs(&cat).len();
        assert_eq!(p, 4);
        assert_eq!(generate_inverting_tests(&cat).len(), p * (p - 1));
    }

    #[test]
    fn nor2_nand2_xor2_is_hard() {
        let cat = toy_catalog();
        let tests = generate_funsim_tests(&cat);
        let t = tests.iter().find(|t| t.anchor == "NOR2" && t.a == "NAND2" && t.b == "XOR2").unwrap();
        assert_eq!(t.answer, "NAND2");
        assert_eq!(t.difficulty, Difficulty::Hard);
        assert_eq!(t.margin, 0.25);
        // equal similarities produce no test: FunSim(AND2,NOR2) = FunSim(NAND2,NOR2) = 1/2
        assert!(!tests.iter().any(|t| t.anchor == "NOR2" && t.a == "AND2" && t.b == "NAND2"));
        for t in &tests {
            assert!(t.margin > 0.0);
            assert_eq!(t.difficulty == Difficulty::Easy, t.margin >= 0.5);
            assert!(t.a < t.b);
        }
    }

    #[test]
    fn funsim_answers_by_brute_force() {
        let cat = toy_catalog();
        for t in generate_funsim_tests(&cat) {
            let c = cat.truth_table(&t.anchor).unwrap();
            let count = |x: &str| {
                let tx = cat.truth_table(x).unwrap();
                (0..c.bits.len()).filter(|&i| tx.bits[i] == c.bits[i]).count()
            };
            let expected = if count(&t.a) > count(&t.b) { &t.a } else { &t.b };
            assert_eq!(&t.answer, expected);
        }
    }

    #[test]
    fn electrical_oracle_and_single_candidate() {
        let lib = parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap();
        let grid = build_condition_grid(&lib, 8, 8).unwrap();
        let tests = generate_electrical_tests(&lib, &grid, &ElectricalSampling::default());
        assert!(!tests.is_empty());
        assert!(verify_electrical(&lib, &grid, &tests).is_empty());
        for t in &tests {
            let k = t.candidates.iter().position(|c| *c == t.answer_arc).unwrap();
            assert!(t.distances.iter().all(|d| *d >= t.distances[k]));
            assert_ne!(lib.cells[&t.query_arc.cell].cell_type, t.candidate_type);
        }

        let q = ArcId { cell: "q".into(), output_pin: "Y".into(), related_pin: "A".into() };
        let only = ArcId { cell: "c".into(), output_pin: "Y".into(), related_pin: "A".into() };
        let v = vec![1.0, 2.0];
        let w = vec![5.0, 5.0];
        assert_eq!(nearest_arc(&v, &[(only.clone(), w.as_slice())]).unwrap().0, only);
        let twin = ArcId { cell: "b".into(), ..only.clone() };
        let (ans, d) = nearest_arc(&v, &[(only.clone(), w.as_slice()), (twin.clone(), v.as_slice())]).unwrap();
        assert_eq!((ans, d), (twin, 0.0));
        let _ = q;
    }

    #[test]
    fn sampling_cap_and_determinism() {
        let lib = parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap();
        let grid = build_condition_grid(&lib, 4, 4).unwrap();
        let s = ElectricalSampling { cap: 10, seed: 3, ..Default::default() };
        let a = generate_electrical_tests(&lib, &grid, &s);
        let b = generate_electrical_tests(&lib, &grid, &s);
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);
        let s2 = ElectricalSampling { per_property: Some([1, 2, 3, 4, 5, 6]), ..s };
        let c = generate_electrical_tests(&lib, &grid, &s2);
        assert_eq!(c.len(), 21);
    }

    #[test]
    fn jsonl_roundtrip() {
        let lib = parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap();
        let grid = build_condition_grid(&lib, 4, 4).unwrap();
        let suite = TestSuite::generate(&lib, &grid, &ElectricalSampling { cap: 20, ..Default::default() });
        let dir = tempfile::tempdir().unwrap();
        suite.write_dir(dir.path()).unwrap();
        let back = TestSuite::read_dir(dir.path()).unwrap();
        assert_eq!(back, suite);
        let first = std::fs::read_to_string(dir.path().join("funsim.jsonl")).unwrap();
        assert!(first.lines().next().unwrap().starts_with("{\"schema\":1,\"kind\":\"functional_similarity\""));
    }
}
