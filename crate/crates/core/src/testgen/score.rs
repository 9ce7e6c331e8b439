// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{euclidean, Difficulty, ElectricalSimilarityTest, FunctionalSimilarityTest, InvertingAnalogyTest};
use crate::liberty::{ArcId, Property};

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no vector for '{0}'")]
    MissingVector(String),
    #[error("vector for '{name}' has dimension {got}, expected {expected}")]
    Dimension { name: String, got: usize, expected: usize },
}

/// Property-specific arc vectors.
pub type ArcVectors = BTreeMap<Property, BTreeMap<ArcId, Vec<f64>>>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn record(&mut self, hit: bool) {
        self.total += 1;
        self.correct += usize::from(hit);
    }
}

/// Candidates sorted by distance to `query`, ties broken by key order.
pub fn rank_by_distance<'a, K: Ord + Clone + 'a>(
    query: &[f64],
    candidates: impl IntoIterator<Item = (&'a K, &'a Vec<f64>)>,
) -> Vec<(K, f64)> {
    let mut ranked: Vec<(K, f64)> = candidates.into_iter().map(|(k, v)| (k.clone(), euclidean(query, v))).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

fn lookup<'a>(vectors: &'a BTreeMap<String, Vec<f64>>, name: &str) -> Result<&'a Vec<f64>, ScoreError> {
    vectors.get(name).ok_or_else(|| ScoreError::MissingVector(name.to_string()))
}

/// Top-K analogy accuracy with the three query types excluded from candidates.
pub fn score_inverting(
    tests: &[InvertingAnalogyTest],
    type_vectors: &BTreeMap<String, Vec<f64>>,
    k: usize,
) -> Result<Accuracy, ScoreError> {
    let mut acc = Accuracy::default();
    for t in tests {
        let (x, xbar) = (&t.given_pair.0, &t.given_pair.1);
        let vx = lookup(type_vectors, x)?;
        let vxbar = lookup(type_vectors, xbar)?;
        let vy = lookup(type_vectors, &t.probe)?;
        lookup(type_vectors, &t.answer)?;
        let target: Vec<f64> = vxbar.iter().zip(vx).zip(vy).map(|((a, b), c)| a - b + c).collect();
        let ranked =
            rank_by_distance(&target, type_vectors.iter().filter(|(n, _)| *n != x && *n != xbar && **n != t.probe));
        acc.record(ranked.iter().take(k).any(|(n, _)| *n == t.answer));
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FunsimScore {
    pub easy: Accuracy,
    pub hard: Accuracy,
}

/// Predicts the closer of A and B; on an exact tie predicts A.
pub fn score_funsim(
    tests: &[FunctionalSimilarityTest],
    type_vectors: &BTreeMap<String, Vec<f64>>,
) -> Result<FunsimScore, ScoreError> {
    let mut s = FunsimScore::default();
    for t in tests {
        let c = lookup(type_vectors, &t.anchor)?;
        let da = euclidean(c, lookup(type_vectors, &t.a)?);
        let db = euclidean(c, lookup(type_vectors, &t.b)?);
        let pred = if db < da { &t.b } else { &t.a };
        let hit = *pred == t.answer;
        match t.difficulty {
            Difficulty::Easy => s.easy.record(hit),
            Difficulty::Hard => s.hard.record(hit),
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElectricalScore {
    pub k: usize,
    pub per_property: BTreeMap<Property, Accuracy>,
}

impl ElectricalScore {
    /// Mean of per-property accuracies.
    pub fn macro_avg(&self) -> f64 {
        if self.per_property.is_empty() {
            return 0.0;
        }
        self.per_property.values().map(Accuracy::fraction).sum::<f64>() / self.per_property.len() as f64
    }

    /// Accuracy pooled over all tests.
    pub fn micro_avg(&self) -> f64 {
        let (c, t) = self.per_property.values().fold((0, 0), |(c, t), a| (c + a.correct, t + a.total));
        if t == 0 {
            0.0
        } else {
            c as f64 / t as f64
        }
    }
}

pub fn score_electrical(
    tests: &[ElectricalSimilarityTest],
    arc_vectors: &ArcVectors,
    k: usize,
) -> Result<ElectricalScore, ScoreError> {
    let mut score = ElectricalScore { k, per_property: BTreeMap::new() };
    for t in tests {
        let vecs =
            arc_vectors.get(&t.property).ok_or_else(|| ScoreError::MissingVector(format!("{} vectors", t.property)))?;
        let get = |id: &ArcId| vecs.get(id).ok_or_else(|| ScoreError::MissingVector(format!("{id} {}", t.property)));
        let q = get(&t.query_arc)?;
        let cands = t.candidates.iter().map(|c| get(c).map(|v| (c, v))).collect::<Result<Vec<_>, _>>()?;
        let ranked = rank_by_distance(q, cands);
        let hit = ranked.iter().take(k).any(|(id, _)| *id == t.answer_arc);
        score.per_property.entry(t.property).or_default().record(hit);
    }
    Ok(score)
}

/// Expected top-K analogy accuracy of a random embedding over `m` types.
pub fn inverting_random_baseline(m: usize, k: usize) -> f64 {
    let pool = m.saturating_sub(3);
    if pool == 0 {
        return 0.0;
    }
    k.min(pool) as f64 / pool as f64
}

/// Mean over tests of K/|candidates|, capped at 1.
pub fn electrical_random_baseline(tests: &[ElectricalSimilarityTest], k: usize) -> f64 {
    if tests.is_empty() {
        return 0.0;
    }
    tests.iter().map(|t| k.min(t.candidates.len()) as f64 / t.candidates.len() as f64).sum::<f64>() / tests.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("T{i:02}")).collect()
    }

    fn random_vectors(ns: &[String], d: usize, rng: &mut ChaCha8Rng) -> BTreeMap<String, Vec<f64>> {
        ns.iter().map(|n| (n.clone(), (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect()
    }

    fn analogy_tests(ns: &[String]) -> Vec<InvertingAnalogyTest> {
        let pairs: Vec<(String, String)> = ns.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
        let mut out = vec![];
        for (i, p) in pairs.iter().enumerate() {
            for (j, q) in pairs.iter().enumerate() {
                if i != j {
                    out.push(InvertingAnalogyTest { given_pair: p.clone(), probe: q.0.clone(), answer: q.1.clone() });
                }
            }
        }
        out
    }

    #[test]
    fn exact_additive_structure_scores_one() {
        let ns = names(12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let offset: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut vecs = BTreeMap::new();
        for c in ns.chunks(2) {
            let base: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let inv: Vec<f64> = base.iter().zip(&offset).map(|(a, b)| a + b).collect();
            vecs.insert(c[0].clone(), base);
            vecs.insert(c[1].clone(), inv);
        }
        let acc = score_inverting(&analogy_tests(&ns), &vecs, 1).unwrap();
        assert_eq!(acc.correct, acc.total);
    }

    #[test]
    fn missing_vector_reported() {
        let ns = names(4);
        let mut vecs = random_vectors(&ns, 3, &mut ChaCha8Rng::seed_from_u64(0));
        vecs.remove("T03");
        assert_eq!(score_inverting(&analogy_tests(&ns), &vecs, 1), Err(ScoreError::MissingVector("T03".into())));
    }

    #[test]
    fn funsim_tie_predicts_first() {
        let t = FunctionalSimilarityTest {
            anchor: "C".into(),
            a: "A".into(),
            b: "B".into(),
            answer: "A".into(),
            difficulty: Difficulty::Hard,
            margin: 0.25,
        };
        let vecs: BTreeMap<String, Vec<f64>> =
            [("A", vec![1.0]), ("B", vec![1.0]), ("C", vec![0.0])].map(|(n, v)| (n.to_string(), v)).into();
        let s = score_funsim(std::slice::from_ref(&t), &vecs).unwrap();
        assert_eq!(s.hard, Accuracy { correct: 1, total: 1 });
        let t2 = FunctionalSimilarityTest { answer: "B".into(), ..t };
        assert_eq!(score_funsim(&[t2], &vecs).unwrap().hard.correct, 0);
    }

    #[test]
    fn random_inverting_matches_baseline() {
        // Monte-Carlo over many seeds; the estimate must sit near K/(M-3).
        let ns = names(20);
        let tests = analogy_tests(&ns);
        let (k, seeds) = (3, 200);
        let mut hits = 0;
        let mut total = 0;
        for s in 0..seeds {
            let vecs = random_vectors(&ns, 8, &mut ChaCha8Rng::seed_from_u64(s));
            let a = score_inverting(&tests, &vecs, k).unwrap();
            hits += a.correct;
            total += a.total;
        }
        let p = inverting_random_baseline(ns.len(), k);
        assert!((p - 3.0 / 17.0).abs() < 1e-15);
        let est = hits as f64 / total as f64;
        assert!((est - p).abs() < 0.02, "est {est} vs {p}");
    }

    #[test]
    fn rotation_invariance() {
        let ns = names(10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vecs = random_vectors(&ns, 3, &mut rng);
        let tests = analogy_tests(&ns);
        // rotation about z then x, plus translation
        let (a, b) = (0.7f64, -1.3f64);
        let rot = |v: &Vec<f64>| {
            let (x, y, z) = (v[0] * a.cos() - v[1] * a.sin(), v[0] * a.sin() + v[1] * a.cos(), v[2]);
            vec![x + 5.0, y * b.cos() - z * b.sin() - 2.0, y * b.sin() + z * b.cos() + 1.0]
        };
        let moved: BTreeMap<String, Vec<f64>> = vecs.iter().map(|(n, v)| (n.clone(), rot(v))).collect();
        for k in [1, 3, 5] {
            assert_eq!(score_inverting(&tests, &vecs, k).unwrap(), score_inverting(&tests, &moved, k).unwrap());
        }
    }

    #[test]
    fn electrical_random_baseline_formula() {
        let id = |c: &str| ArcId { cell: c.into(), output_pin: "Y".into(), related_pin: "A".into() };
        let mk = |n: usize| ElectricalSimilarityTest {
            property: Property::RiseDelay,
            query_arc: id("q"),
            candidate_type: "T".into(),
            candidates: (0..n).map(|i| id(&format!("c{i}"))).collect(),
            distances: vec![0.0; n],
            answer_arc: id("c0"),
        };
        let tests = vec![mk(1), mk(4), mk(10)];
        let want = (1.0 + 0.5 + 0.2) / 3.0;
        assert!((electrical_random_baseline(&tests, 2) - want).abs() < 1e-15);
    }
}
