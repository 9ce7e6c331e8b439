// SPDX-License-Identifier: Apache-2.0

//! Artificial combinational netlists over library cells, and their logic
//! labels: output bit vectors, logic probability and switching activity.
//!
//! Netlists are built level by level. Ports sit at level 0; every instance
//! at level `l` reads at least one net driven at level `l-1` and its other
//! inputs from any earlier level, so the graph is acyclic by construction
//! and the deepest instance sits exactly at the target level count.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolfn::{BoolExpr, BoolFnError, CompiledExpr, FunctionCatalog};
use crate::liberty::Library;

pub const NETLIST_SCHEMA: u32 = 1;
/// Random vectors applied when a netlist has too many ports to enumerate.
pub const DEFAULT_MC_VECTORS: usize = 10_000;
/// Largest port count simulated exhaustively by [`auto_patterns`].
pub const EXACT_PORT_LIMIT: usize = 16;
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum NetgenError {
    #[error("infeasible envelope: {0}")]
    EnvelopeInfeasible(String),
    #[error("library has no combinational single-output cell types with inputs")]
    NoCells,
    #[error("instance '{instance}' pin '{pin}' reads net '{net}', which has no driver")]
    UnconnectedNet { instance: String, pin: String, net: String },
    #[error("net '{0}' has more than one driver")]
    MultipleDrivers(String),
    #[error("netlist has a combinational cycle through '{0}'")]
    Cycle(String),
    #[error("instance '{instance}': {source}")]
    Function { instance: String, source: BoolFnError },
    #[error("pattern set covers {got} ports, netlist has {want}")]
    PortMismatch { got: usize, want: usize },
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
}

/// Inclusive bounds on the statistics of generated netlists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub cells: (usize, usize),
    pub ports: (usize, usize),
    pub edges: (usize, usize),
    pub levels: (usize, usize),
}

impl Default for Envelope {
    fn default() -> Self {
        Self { cells: (16, 235), ports: (1, 16), edges: (34, 875), levels: (7, 111) }
    }
}

impl Envelope {
    pub fn validate(&self) -> Result<(), NetgenError> {
        let bad = |m: String| Err(NetgenError::EnvelopeInfeasible(m));
        for (name, (lo, hi)) in
            [("cells", self.cells), ("ports", self.ports), ("edges", self.edges), ("levels", self.levels)]
        {
            if lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] is empty"));
            }
            if lo == 0 {
                return bad(format!("{name} lower bound must be positive"));
            }
        }
        if self.levels.0 > self.cells.1 {
            return bad(format!("at least {} levels need more than {} cells", self.levels.0, self.cells.1));
        }
        if self.edges.1 < self.cells.0 {
            return bad(format!("{} cells need at least as many edges, max is {}", self.cells.0, self.edges.1));
        }
        Ok(())
    }

    pub fn contains(&self, s: &NetlistStats) -> bool {
        let inside = |v: usize, (lo, hi): (usize, usize)| (lo..=hi).contains(&v);
        inside(s.cells, self.cells)
            && inside(s.ports, self.ports)
            && inside(s.edges, self.edges)
            && inside(s.levels, self.levels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub cell: String,
    /// Output function over the keys of `inputs`.
    pub function: String,
    /// Input pin → driving net.
    pub inputs: BTreeMap<String, String>,
    pub output_pin: String,
    pub output: String,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub schema: u32,
    pub seed: u64,
    pub ports: Vec<String>,
    /// Instances in topological order.
    pub instances: Vec<Instance>,
    /// Every net: ports first, then instance outputs.
    pub nets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistStats {
    pub cells: usize,
    pub ports: usize,
    /// Driver-to-input-pin connections.
    pub edges: usize,
    pub levels: usize,
}

impl Netlist {
    /// Builds a netlist from ports and instances, checking that every input
    /// is driven, nets are singly driven and the graph is acyclic. Instances
    /// are reordered topologically and their levels recomputed.
    pub fn new(seed: u64, ports: Vec<String>, instances: Vec<Instance>) -> Result<Self, NetgenError> {
        let mut driver: HashMap<&str, Option<usize>> = HashMap::new();
        for p in &ports {
            if driver.insert(p, None).is_some() {
                return Err(NetgenError::MultipleDrivers(p.clone()));
            }
        }
        for (i, inst) in instances.iter().enumerate() {
            if driver.insert(&inst.output, Some(i)).is_some() {
                return Err(NetgenError::MultipleDrivers(inst.output.clone()));
            }
        }
        for inst in &instances {
            for (pin, net) in &inst.inputs {
                if !driver.contains_key(net.as_str()) {
                    return Err(NetgenError::UnconnectedNet {
                        instance: inst.name.clone(),
                        pin: pin.clone(),
                        net: net.clone(),
                    });
                }
            }
        }
        // Kahn's algorithm, smallest index first for a stable order
        let n = instances.len();
        let mut indeg = vec![0usize; n];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, inst) in instances.iter().enumerate() {
            for net in inst.inputs.values() {
                if let Some(Some(d)) = driver.get(net.as_str()) {
                    indeg[i] += 1;
                    fanout[*d].push(i);
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut level = vec![1usize; n];
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &fanout[i] {
                level[j] = level[j].max(level[i] + 1);
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(NetgenError::Cycle(instances[stuck].name.clone()));
        }
        let mut slots: Vec<Option<Instance>> = instances.into_iter().map(Some).collect();
        let instances: Vec<Instance> = order
            .into_iter()
            .map(|i| {
                let mut inst = slots[i].take().expect("each index appears once");
                inst.level = level[i];
                inst
            })
            .collect();
        let nets = ports.iter().cloned().chain(instances.iter().map(|i| i.output.clone())).collect();
        Ok(Self { schema: NETLIST_SCHEMA, seed, ports, instances, nets })
    }

    pub fn stats(&self) -> NetlistStats {
        NetlistStats {
            cells: self.instances.len(),
            ports: self.ports.len(),
            edges: self.instances.iter().map(|i| i.inputs.len()).sum(),
            levels: self.instances.iter().map(|i| i.level).max().unwrap_or(0),
        }
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("netlist serializes");
        v.push(b'\n');
        v
    }

    /// Parses and revalidates a netlist.
    pub fn from_json(text: &str) -> Result<Self, NetgenError> {
        let raw: Netlist =
            serde_json::from_str(text).map_err(|source| NetgenError::Json { context: "netlist".into(), source })?;
        Netlist::new(raw.seed, raw.ports, raw.instances)
    }

    pub fn write(&self, path: &Path) -> Result<(), NetgenError> {
        crate::write_atomic(path, &self.to_json_bytes())
            .map_err(|source| NetgenError::Io { context: path.display().to_string(), source })
    }

    pub fn read(path: &Path) -> Result<Self, NetgenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| NetgenError::Io { context: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}

/// A cell usable by the generator.
#[derive(Debug, Clone)]
struct CellChoice {
    cell: String,
    function: String,
    pins: Vec<String>,
    output_pin: String,
}

fn cell_choices(lib: &Library) -> Vec<Vec<CellChoice>> {
    let catalog = FunctionCatalog::build(lib);
    let mut by_type = Vec::new();
    for info in catalog.types.values() {
        if info.truth_table.is_none() || info.input_pins.is_empty() {
            continue;
        }
        let members: Vec<CellChoice> = info
            .cells
            .iter()
            .filter_map(|c| {
                let cell = lib.cell(c)?;
                let out = cell.output_pins.first()?;
                Some(CellChoice {
                    cell: c.clone(),
                    function: out.function.as_ref()?.to_string(),
                    pins: info.input_pins.clone(),
                    output_pin: out.name.clone(),
                })
            })
            .collect();
        if !members.is_empty() {
            by_type.push(members);
        }
    }
    by_type
}

fn pick(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

/// Generates one netlist inside `envelope`, deterministically under `seed`.
pub fn generate_netlist(lib: &Library, seed: u64, envelope: &Envelope) -> Result<Netlist, NetgenError> {
    envelope.validate()?;
    let choices = cell_choices(lib);
    if choices.is_empty() {
        return Err(NetgenError::NoCells);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(n) = attempt(&choices, seed, envelope, &mut rng)? {
            return Ok(n);
        }
    }
    Err(NetgenError::EnvelopeInfeasible(format!(
        "no netlist within {envelope:?} after {MAX_ATTEMPTS} attempts with this library"
    )))
}

fn attempt(
    choices: &[Vec<CellChoice>],
    seed: u64,
    env: &Envelope,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Netlist>, NetgenError> {
    let cells = pick(rng, env.cells);
    let level_hi = env.levels.1.min(cells);
    if env.levels.0 > level_hi {
        return Ok(None);
    }
    // depth grows with size, roughly 0.25 to 0.6 levels per cell
    let frac = rng.gen_range(0.25..0.6);
    let levels = ((cells as f64 * frac).round() as usize).clamp(env.levels.0, level_hi);
    let ports = pick(rng, env.ports);

    let kinds: Vec<&CellChoice> = (0..cells)
        .map(|_| {
            let members = &choices[rng.gen_range(0..choices.len())];
            &members[rng.gen_range(0..members.len())]
        })
        .collect();
    let edges: usize = kinds.iter().map(|k| k.pins.len()).sum();
    if !(env.edges.0..=env.edges.1).contains(&edges) {
        return Ok(None);
    }

    // split cells into `levels` non-empty groups
    let mut cuts: Vec<usize> = if levels > 1 {
        index::sample(rng, cells - 1, levels - 1).into_iter().map(|c| c + 1).collect()
    } else {
        Vec::new()
    };
    cuts.sort_unstable();
    cuts.push(cells);

    let port_names: Vec<String> = (0..ports).map(|i| format!("in{i}")).collect();
    // nets per level; level 0 holds the ports
    let mut by_level: Vec<Vec<String>> = vec![port_names.clone()];
    let mut unused: Vec<String> = port_names.clone();
    let mut instances = Vec::with_capacity(cells);
    let mut start = 0;
    for (l, &end) in cuts.iter().enumerate() {
        let level = l + 1;
        let earlier: Vec<String> = by_level.iter().flatten().cloned().collect();
        let mut produced = Vec::new();
        for (i, kind) in kinds.iter().enumerate().take(end).skip(start) {
            let mut inputs = BTreeMap::new();
            for (k, pin) in kind.pins.iter().enumerate() {
                let pool: Vec<&String> = if k == 0 {
                    // the first pin fixes the level: read from the previous one
                    let prev = &by_level[level - 1];
                    let fresh: Vec<&String> = prev.iter().filter(|n| unused.contains(n)).collect();
                    if fresh.is_empty() {
                        prev.iter().collect()
                    } else {
                        fresh
                    }
                } else if unused.is_empty() {
                    earlier.iter().collect()
                } else {
                    unused.iter().collect()
                };
                let net = pool[rng.gen_range(0..pool.len())].clone();
                unused.retain(|n| *n != net);
                inputs.insert(pin.clone(), net);
            }
            let output = format!("n{i}");
            instances.push(Instance {
                name: format!("u{i}"),
                cell: kind.cell.clone(),
                function: kind.function.clone(),
                inputs,
                output_pin: kind.output_pin.clone(),
                output: output.clone(),
                level,
            });
            produced.push(output);
        }
        unused.extend(produced.iter().cloned());
        by_level.push(produced);
        start = end;
    }
    let netlist = Netlist::new(seed, port_names, instances)?;
    Ok(env.contains(&netlist.stats()).then_some(netlist))
}

/// Generates `count` netlists with seeds `seed, seed+1, ...` on all cores.
pub fn generate_many(lib: &Library, seed: u64, count: usize, envelope: &Envelope) -> Result<Vec<Netlist>, NetgenError> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1));
    let chunk = count.div_ceil(threads.max(1)).max(1);
    let idx: Vec<usize> = (0..count).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = idx
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&i| generate_netlist(lib, seed.wrapping_add(i as u64), envelope))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(count);
        for h in handles {
            out.extend(h.join().expect("generator thread panicked")?);
        }
        Ok(out)
    })
}

/// Input vectors for every port, packed 64 vectors per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patterns {
    pub count: usize,
    pub exhaustive: bool,
    /// `words[port][k]` holds vectors `64k..64k+63`, bit `i` for vector `64k+i`.
    pub words: Vec<Vec<u64>>,
}

fn word_count(n: usize) -> usize {
    n.div_ceil(64)
}

fn tail_mask(count: usize) -> u64 {
    match count % 64 {
        0 => !0,
        r => (1u64 << r) - 1,
    }
}

impl Patterns {
    /// All `2^ports` vectors in counting order; port 0 is the most significant bit.
    pub fn exhaustive(ports: usize) -> Self {
        assert!(ports < 32, "exhaustive enumeration of {ports} ports");
        let count = 1usize << ports;
        let nw = word_count(count);
        let words = (0..ports)
            .map(|p| {
                let shift = ports - 1 - p;
                (0..nw)
                    .map(|k| {
                        let mut w = 0u64;
                        for i in 0..64 {
                            let v = k * 64 + i;
                            if v < count && (v >> shift) & 1 == 1 {
                                w |= 1 << i;
                            }
                        }
                        w
                    })
                    .collect()
            })
            .collect();
        Self { count, exhaustive: true, words }
    }

    /// `count` independent uniform vectors from a seeded stream.
    pub fn random(ports: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nw = word_count(count);
        let mask = tail_mask(count);
        let words = (0..ports)
            .map(|_| {
                let mut v: Vec<u64> = (0..nw).map(|_| rng.next_u64()).collect();
                if let Some(last) = v.last_mut() {
                    *last &= mask;
                }
                v
            })
            .collect();
        Self { count, exhaustive: false, words }
    }

    /// Explicit vectors, each assigning every port.
    pub fn from_vectors(vectors: &[Vec<bool>]) -> Self {
        let ports = vectors.first().map_or(0, Vec::len);
        let count = vectors.len();
        let mut words = vec![vec![0u64; word_count(count)]; ports];
        for (v, bits) in vectors.iter().enumerate() {
            for (p, &b) in bits.iter().enumerate() {
                if b {
                    words[p][v / 64] |= 1 << (v % 64);
                }
            }
        }
        Self { count, exhaustive: false, words }
    }
}

/// Exhaustive when the port count allows it, else seeded random vectors.
pub fn auto_patterns(ports: usize, mc_vectors: usize, seed: u64) -> Patterns {
    if ports <= EXACT_PORT_LIMIT {
        Patterns::exhaustive(ports)
    } else {
        Patterns::random(ports, mc_vectors, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinLabel {
    pub instance: String,
    pub cell: String,
    pub pin: String,
    pub net: String,
    pub logic_probability: f64,
    pub switching_activity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicLabels {
    pub vectors: usize,
    pub exhaustive: bool,
    pub pins: Vec<PinLabel>,
    /// Output words per pin, laid out like [`Patterns::words`].
    pub outputs: Vec<Vec<u64>>,
}

impl LogicLabels {
    /// Output bits of pin `i` as a '0'/'1' string, vector 0 first.
    pub fn bit_string(&self, i: usize) -> String {
        (0..self.vectors).map(|v| if self.outputs[i][v / 64] >> (v % 64) & 1 == 1 { '1' } else { '0' }).collect()
    }

    /// One JSON object per pin with the label values and the output vector.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        for (i, p) in self.pins.iter().enumerate() {
            let mut obj = serde_json::to_value(p).expect("label serializes");
            obj["vectors"] = self.vectors.into();
            obj["output"] = self.bit_string(i).into();
            serde_json::to_writer(&mut buf, &obj).expect("label serializes");
            buf.push(b'\n');
        }
        buf
    }
}

fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

/// Number of positions where consecutive vectors differ.
fn toggles(words: &[u64], count: usize) -> usize {
    if count < 2 {
        return 0;
    }
    let mut total = 0;
    for (k, &w) in words.iter().enumerate() {
        let next = words.get(k + 1).map_or(0, |n| n & 1);
        let mut t = w ^ ((w >> 1) | (next << 63));
        // toggle bit i compares vector 64k+i with 64k+i+1; keep those below count-1
        let valid = (count - 1).saturating_sub(k * 64).min(64);
        if valid < 64 {
            t &= (1u64 << valid) - 1;
        }
        total += t.count_ones() as usize;
    }
    total
}

pub fn compile_instances(netlist: &Netlist) -> Result<Vec<CompiledExpr>, NetgenError> {
    netlist
        .instances
        .iter()
        .map(|inst| {
            let pins: Vec<String> = inst.inputs.keys().cloned().collect();
            BoolExpr::parse(&inst.function)
                .and_then(|e| e.compile(&pins))
                .map_err(|source| NetgenError::Function { instance: inst.name.clone(), source })
        })
        .collect()
}

/// Evaluates the netlist on `patterns` in topological order, 64 vectors at a time.
pub fn simulate(netlist: &Netlist, patterns: &Patterns) -> Result<LogicLabels, NetgenError> {
    if patterns.words.len() != netlist.ports.len() {
        return Err(NetgenError::PortMismatch { got: patterns.words.len(), want: netlist.ports.len() });
    }
    let compiled = compile_instances(netlist)?;
    let mut values: HashMap<&str, usize> = HashMap::new();
    for (i, p) in netlist.ports.iter().enumerate() {
        values.insert(p, i);
    }
    let nw = word_count(patterns.count);
    let mask = tail_mask(patterns.count);
    let mut columns: Vec<Vec<u64>> = patterns.words.clone();
    let mut args: Vec<u64> = Vec::new();
    for (inst, f) in netlist.instances.iter().zip(&compiled) {
        let srcs: Vec<usize> = inst
            .inputs
            .iter()
            .map(|(pin, net)| {
                values.get(net.as_str()).copied().ok_or_else(|| NetgenError::UnconnectedNet {
                    instance: inst.name.clone(),
                    pin: pin.clone(),
                    net: net.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        let mut out = vec![0u64; nw];
        for (k, o) in out.iter_mut().enumerate() {
            args.clear();
            args.extend(srcs.iter().map(|&s| columns[s][k]));
            *o = f.eval_words(&args);
        }
        if let Some(last) = out.last_mut() {
            *last &= mask;
        }
        values.insert(&inst.output, columns.len());
        columns.push(out);
    }
    let n = patterns.count;
    let outputs: Vec<Vec<u64>> = columns.split_off(netlist.ports.len());
    let pins = netlist
        .instances
        .iter()
        .zip(&outputs)
        .map(|(inst, w)| PinLabel {
            instance: inst.name.clone(),
            cell: inst.cell.clone(),
            pin: inst.output_pin.clone(),
            net: inst.output.clone(),
            logic_probability: if n == 0 { 0.0 } else { popcount(w) as f64 / n as f64 },
            switching_activity: if n < 2 { 0.0 } else { toggles(w, n) as f64 / (n - 1) as f64 },
        })
        .collect();
    Ok(LogicLabels { vectors: n, exhaustive: patterns.exhaustive, pins, outputs })
}

/// Binomial standard error of a Monte-Carlo logic probability.
pub fn probability_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Standard error of the measured toggle rate over `n` independent uniform
/// vectors when the true logic probability is `p`. Consecutive toggles
/// share a vector, which adds a lag-one covariance of p(1-p)(1-2p)^2.
pub fn activity_sigma(p: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    let s = 2.0 * p * (1.0 - p);
    let cov = p * (1.0 - p) * (1.0 - 2.0 * p).powi(2);
    ((m * s * (1.0 - s) + 2.0 * (m - 1.0) * cov) / (m * m)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::parse_liberty;
    use crate::synth::{synth_liberty, SynthSpec};
    use proptest::prelude::*;

    fn lib() -> Library {
        parse_liberty(&synth_liberty(&SynthSpec::asap7_like())).unwrap()
    }

    fn inst(name: &str, function: &str, inputs: &[(&str, &str)], output: &str) -> Instance {
        Instance {
            name: name.into(),
            cell: name.to_uppercase(),
            function: function.into(),
            inputs: inputs.iter().map(|(p, n)| (p.to_string(), n.to_string())).collect(),
            output_pin: "Y".into(),
            output: output.into(),
            level: 0,
        }
    }

    /// Repeated sweeps in reverse order until every net is known.
    fn fixed_point(netlist: &Netlist, patterns: &Patterns) -> Vec<Vec<u64>> {
        let compiled = compile_instances(netlist).unwrap();
        let mut known: HashMap<String, Vec<u64>> =
            netlist.ports.iter().cloned().zip(patterns.words.iter().cloned()).collect();
        loop {
            let mut changed = false;
            for (inst, f) in netlist.instances.iter().zip(&compiled).rev() {
                if known.contains_key(&inst.output) || !inst.inputs.values().all(|n| known.contains_key(n)) {
                    continue;
                }
                let nw = word_count(patterns.count);
                let out: Vec<u64> = (0..nw)
                    .map(|k| {
                        let args: Vec<u64> = inst.inputs.values().map(|n| known[n][k]).collect();
                        f.eval_words(&args) & if k + 1 == nw { tail_mask(patterns.count) } else { !0 }
                    })
                    .collect();
                known.insert(inst.output.clone(), out);
                changed = true;
            }
            if !changed {
                break;
            }
        }
        netlist.instances.iter().map(|i| known[&i.output].clone()).collect()
    }

    #[test]
    fn single_inverter_chain() {
        let n = Netlist::new(0, vec!["a".into()], vec![inst("u0", "!A", &[("A", "a")], "y")]).unwrap();
        let pats = Patterns::from_vectors(&[vec![false], vec![true], vec![false], vec![true]]);
        let l = simulate(&n, &pats).unwrap();
        assert_eq!(l.bit_string(0), "1010");
        assert_eq!(l.pins[0].logic_probability, 0.5);
        assert_eq!(l.pins[0].switching_activity, 1.0);
        let big = simulate(&n, &Patterns::random(1, 20_000, 3)).unwrap();
        let a = big.pins[0].switching_activity;
        assert!((a - 0.5).abs() < 4.0 * activity_sigma(0.5, 20_000), "{a}");
    }

    #[test]
    fn tied_complementary_and_is_constant() {
        let n = Netlist::new(
            0,
            vec!["a".into()],
            vec![inst("u1", "A * B", &[("A", "a"), ("B", "na")], "y"), inst("u0", "!A", &[("A", "a")], "na")],
        )
        .unwrap();
        // reordered so the inverter comes first
        assert_eq!(n.instances[0].name, "u0");
        assert_eq!(n.instances[1].level, 2);
        let l = simulate(&n, &Patterns::random(1, 1000, 1)).unwrap();
        assert_eq!(l.pins[1].logic_probability, 0.0);
        assert_eq!(l.pins[1].switching_activity, 0.0);
    }

    #[test]
    fn structural_errors() {
        let e = Netlist::new(0, vec!["a".into()], vec![inst("u0", "!A", &[("A", "zz")], "y")]).unwrap_err();
        assert!(matches!(e, NetgenError::UnconnectedNet { ref net, .. } if net == "zz"));
        let e = Netlist::new(
            0,
            vec!["a".into()],
            vec![inst("u0", "A * B", &[("A", "a"), ("B", "q")], "p"), inst("u1", "!A", &[("A", "p")], "q")],
        )
        .unwrap_err();
        assert!(matches!(e, NetgenError::Cycle(_)));
        let e = Netlist::new(0, vec!["a".into()], vec![inst("u0", "!A", &[("A", "a")], "a")]).unwrap_err();
        assert!(matches!(e, NetgenError::MultipleDrivers(_)));
    }

    #[test]
    fn infeasible_envelopes() {
        let mut env = Envelope { levels: (300, 400), ..Envelope::default() };
        assert!(matches!(generate_netlist(&lib(), 0, &env), Err(NetgenError::EnvelopeInfeasible(_))));
        env = Envelope { cells: (20, 10), ..Envelope::default() };
        assert!(matches!(env.validate(), Err(NetgenError::EnvelopeInfeasible(_))));
        env = Envelope { edges: (1, 5), ..Envelope::default() };
        assert!(matches!(env.validate(), Err(NetgenError::EnvelopeInfeasible(_))));
    }

    #[test]
    fn minimal_single_port_cone() {
        let env = Envelope { cells: (16, 16), ports: (1, 1), edges: (16, 875), levels: (7, 16) };
        let n = generate_netlist(&lib(), 5, &env).unwrap();
        let s = n.stats();
        assert_eq!((s.cells, s.ports), (16, 1));
        assert!(env.contains(&s));
        assert!(n.instances.iter().all(|i| i.inputs.values().all(|net| n.nets.contains(net))));
    }

    #[test]
    fn exhaustive_patterns_count_in_order() {
        let p = Patterns::exhaustive(3);
        assert_eq!(p.count, 8);
        // port 0 is the msb: 00001111
        assert_eq!(p.words[0][0], 0b1111_0000);
        assert_eq!(p.words[2][0], 0b1010_1010);
    }

    #[test]
    fn toggle_count_crosses_word_boundaries() {
        let bits: Vec<bool> = (0..200).map(|i| (i * 7 / 5) % 3 == 0).collect();
        let p = Patterns::from_vectors(&bits.iter().map(|&b| vec![b]).collect::<Vec<_>>());
        let brute = bits.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(toggles(&p.words[0], 200), brute);
        assert_eq!(popcount(&p.words[0]), bits.iter().filter(|&&b| b).count());
    }

    #[test]
    fn activity_sigma_matches_simulation() {
        // empirical spread of the toggle rate for a p = 0.25 signal
        let n = 400;
        let rates: Vec<f64> = (0..400)
            .map(|s| {
                let w = Patterns::random(2, n, s);
                let and: Vec<u64> = w.words[0].iter().zip(&w.words[1]).map(|(a, b)| a & b).collect();
                toggles(&and, n) as f64 / (n - 1) as f64
            })
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let sd = (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rates.len() - 1) as f64).sqrt();
        let want = activity_sigma(0.25, n);
        assert!((sd / want - 1.0).abs() < 0.15, "sd {sd} vs {want}");
        assert!((mean - 0.375).abs() < 4.0 * want / 20.0);
    }

    #[test]
    fn json_roundtrip_and_determinism() {
        let l = lib();
        let a = generate_netlist(&l, 9, &Envelope::default()).unwrap();
        let b = generate_netlist(&l, 9, &Envelope::default()).unwrap();
        assert_eq!(a, b);
        let back = Netlist::from_json(std::str::from_utf8(&a.to_json_bytes()).unwrap()).unwrap();
        assert_eq!(back, a);
        assert_ne!(generate_netlist(&l, 10, &Envelope::default()).unwrap(), a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generated_netlists_are_valid_and_match_fixed_point(seed in 0u64..10_000) {
            let env = Envelope { cells: (16, 50), levels: (7, 50), ..Envelope::default() };
            let n = generate_netlist(&lib(), seed, &env).unwrap();
            prop_assert!(env.contains(&n.stats()));
            let level: HashMap<&str, usize> = n.instances.iter().map(|i| (i.output.as_str(), i.level)).collect();
            for i in &n.instances {
                for net in i.inputs.values() {
                    prop_assert!(level.get(net.as_str()).copied().unwrap_or(0) < i.level);
                }
            }
            let pats = Patterns::random(n.ports.len(), 300, seed);
            let topo = simulate(&n, &pats).unwrap();
            prop_assert_eq!(topo.outputs, fixed_point(&n, &pats));
        }
    }
}
