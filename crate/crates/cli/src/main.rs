// SPDX-License-Identifier: Apache-2.0

//! `lib2vec` command-line entry point.
//!
//! Usage errors exit with status 2. Runtime errors exit with status 1 and
//! print a JSON object `{"error": kind, "message": text}` on stderr.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lib2vec::boolfn::{FunctionCatalog, TruthTable};
use lib2vec::datagen::DataConfig;
use lib2vec::evalkit::{self, EvalError};
use lib2vec::liberty::Library;
use lib2vec::netgen::{self, Envelope, Netlist, Patterns};
use lib2vec::pipeline::{self, GridDims, PipelineError, RunConfig, SyntheticLibrary};
use lib2vec::testgen::{build_condition_grid, ElectricalSampling, TestSuite};

#[derive(Parser)]
#[command(name = "lib2vec", version, about = "Learned vector representations of standard-cell library cells")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse Liberty files and print a summary.
    Parse {
        #[command(flatten)]
        lib: LibArgs,
        /// Write the parsed library model as JSON.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Print the truth table of a cell's output as a bit string.
    Truthtable {
        /// Cell name.
        cell: String,
        #[command(flatten)]
        lib: LibArgs,
    },
    /// Generate regularity tests.
    Testgen {
        #[command(flatten)]
        lib: LibArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Sampling seed for electrical tests.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        grid: GridArgs,
        /// Electrical tests per property when more pairs are eligible.
        #[arg(long, default_value_t = 1000)]
        cap: usize,
        /// Record the embedding size the tests are meant for.
        #[arg(long)]
        d: Option<usize>,
    },
    /// Generate the four self-supervised training datasets.
    Datagen {
        #[command(flatten)]
        lib: LibArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        grid: GridArgs,
        /// Maximum number of cell pairs in the functional difference dataset.
        #[arg(long, default_value_t = 20_000)]
        pair_cap: usize,
        /// Partner arcs sampled per arc for the electrical difference dataset.
        #[arg(long, default_value_t = 4)]
        partners: usize,
        /// Store electrical targets in a binary f32 sidecar file.
        #[arg(long)]
        sidecar: bool,
    },
    /// Train both models from a run config.
    Train {
        /// Run config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory; defaults to `<out>/data`, generated when missing.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model directory; defaults to `<out>/model`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model against regularity tests.
    Eval {
        /// Model directory or a file inside it.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test directory.
        #[arg(long)]
        tests: PathBuf,
        /// Comma-separated K values.
        #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
        k: Vec<usize>,
        /// Also write the results here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export embeddings as CSV files.
    Export {
        /// Model directory or a file inside it.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank cell types for the analogy x : xbar = y : ?.
    Analogy {
        /// Model directory or a file inside it.
        #[arg(long)]
        checkpoint: PathBuf,
        x: String,
        xbar: String,
        y: String,
        /// Number of ranked types to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Generate artificial combinational netlists.
    Netgen {
        /// Number of netlists.
        #[arg(long)]
        count: usize,
        /// Seed of the first netlist; netlist i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        lib: LibArgs,
        /// Envelope file (JSON with cells, ports, edges, levels as [min, max]).
        #[arg(long)]
        envelope: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "netlists")]
        out: PathBuf,
    },
    /// Simulate a netlist and write per-pin logic labels as JSON lines.
    Simulate {
        /// Netlist file.
        #[arg(long)]
        netlist: PathBuf,
        /// Number of random input vectors.
        #[arg(long, default_value_t = netgen::DEFAULT_MC_VECTORS)]
        vectors: usize,
        /// Seed of the random input vectors.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input vector source.
        #[arg(long, value_enum, default_value_t = SimMode::Auto)]
        mode: SimMode,
        /// Label file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage into one run directory, reusing unchanged stages.
    Pipeline {
        /// Run config (JSON); flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        lib: LibArgs,
        /// Run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Functional and electrical embedding size.
        #[arg(long)]
        d: Option<usize>,
        /// Seed for every stage.
        #[arg(long)]
        seed: Option<u64>,
        /// Training epochs for both models.
        #[arg(long)]
        epochs: Option<usize>,
        /// Condition-grid slew points.
        #[arg(long)]
        slew_points: Option<usize>,
        /// Condition-grid load points.
        #[arg(long)]
        load_points: Option<usize>,
    },
    /// Write a built-in synthetic Liberty library.
    SynthLib {
        #[arg(long, value_enum)]
        kind: SynthKind,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct LibArgs {
    /// Liberty files, merged in order.
    #[arg(long = "lib", num_args = 1..)]
    libs: Vec<PathBuf>,
    /// Use a built-in synthetic library instead of files.
    #[arg(long, value_enum)]
    synthetic: Option<SynthKind>,
    /// Regex removed from cell names to form type keys (repeatable; replaces the defaults).
    #[arg(long = "cell-type-rule")]
    cell_type_rules: Vec<String>,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Condition-grid slew points.
    #[arg(long, default_value_t = 150)]
    slew_points: usize,
    /// Condition-grid load points.
    #[arg(long, default_value_t = 150)]
    load_points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Toy,
    Asap7Like,
}

impl From<SynthKind> for SyntheticLibrary {
    fn from(k: SynthKind) -> Self {
        match k {
            SynthKind::Toy => SyntheticLibrary::Toy,
            SynthKind::Asap7Like => SyntheticLibrary::Asap7Like,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimMode {
    /// Exhaustive when the netlist has at most 16 ports, random otherwise.
    Auto,
    Exact,
    Random,
}

impl LibArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if !self.libs.is_empty() {
            cfg.libs = self.libs.clone();
            cfg.synthetic = None;
        }
        if let Some(k) = self.synthetic {
            cfg.synthetic = Some(k.into());
            cfg.libs.clear();
        }
        if !self.cell_type_rules.is_empty() {
            cfg.cell_type_rules = Some(self.cell_type_rules.clone());
        }
    }

    fn load(&self) -> Result<Library> {
        let mut cfg = RunConfig::default();
        self.apply(&mut cfg);
        if cfg.libs.is_empty() && cfg.synthetic.is_none() {
            bail!(PipelineError::Config("no library given: pass --lib <files> or --synthetic <kind>".into()));
        }
        Ok(pipeline::load_library(&cfg, None)?)
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { lib, json_out } => {
            let l = lib.load()?;
            if let Some(p) = json_out {
                pipeline::write_json(&p, &l.to_json())?;
            }
            print_json(&json!({
                "library": l.name,
                "cells": l.cells.len(),
                "cell_types": l.cell_types().len(),
                "arcs": l.arc_count(),
                "warnings": l.warnings,
            }))
        }
        Command::Truthtable { cell, lib } => {
            let l = lib.load()?;
            let c = l.cell(&cell).with_context(|| format!("unknown cell '{cell}'"))?;
            let f =
                c.single_output_function().with_context(|| format!("cell '{cell}' has no single-output function"))?;
            let tt = TruthTable::from_expr(f, &c.input_pins, lib2vec::boolfn::DEFAULT_INPUT_LIMIT)?;
            println!("{}", tt.as_bit_string());
            Ok(())
        }
        Command::Testgen { lib, out, seed, grid, cap, d } => {
            let l = lib.load()?;
            let g = build_condition_grid(&l, grid.slew_points, grid.load_points)?;
            let mut suite = TestSuite::generate(&l, &g, &ElectricalSampling { cap, seed, ..Default::default() });
            suite.manifest.embedding_dim = d;
            suite.write_dir(&out)?;
            print_json(&serde_json::to_value(&suite.manifest)?)
        }
        Command::Datagen { lib, out, seed, grid, pair_cap, partners, sidecar } => {
            let l = lib.load()?;
            let g = build_condition_grid(&l, grid.slew_points, grid.load_points)?;
            let cfg = DataConfig { func_pair_cap: pair_cap, elec_partners: partners, seed, ..Default::default() };
            let m = pipeline::generate_datasets(&l, &g, &cfg, sidecar, &out)?;
            print_json(&json!({ "out": out, "counts": m.counts, "skipped": m.skipped }))
        }
        Command::Train { config, data, out } => {
            let cfg = RunConfig::read(&config)?;
            let l = pipeline::load_library(&cfg, None)?;
            let data_dir = data.unwrap_or_else(|| cfg.out.join("data"));
            if !data_dir.join("manifest.json").exists() {
                log::info!("no datasets at {}; generating", data_dir.display());
                let g = build_condition_grid(&l, cfg.grid.slew, cfg.grid.load)?;
                pipeline::generate_datasets(&l, &g, &cfg.data, cfg.sidecar, &data_dir)?;
            }
            let ds = lib2vec::datagen::read_datasets(&data_dir)?;
            let hash = lib2vec::datagen::dataset_hash(&data_dir)?;
            let trained = evalkit::train(&l, &ds, &cfg.train, &hash)?;
            let model = out.unwrap_or_else(|| cfg.out.join("model"));
            pipeline::write_model_dir(&model, &trained)?;
            print_json(&json!({
                "model": model,
                "parameters": evalkit::parameter_count(&trained),
                "func_out_accuracy": trained.report.func_out_accuracy,
                "final_func_loss": trained.report.func_losses.last(),
                "final_elec_loss": trained.report.elec_losses.last(),
            }))
        }
        Command::Eval { checkpoint, tests, k, out } => {
            if k.is_empty() || k.contains(&0) {
                bail!(PipelineError::Config("--k must list positive values".into()));
            }
            let report = pipeline::read_report(&checkpoint)?;
            let suite = TestSuite::read_dir(&tests)?;
            let results = evalkit::evaluate(&report, &suite, &k)?;
            if let Some(p) = out {
                pipeline::write_json(&p, &results)?;
            }
            print_json(&serde_json::to_value(&results)?)
        }
        Command::Export { checkpoint, out } => {
            let report = pipeline::read_report(&checkpoint)?;
            let files = evalkit::export_vectors(&report, &out)?;
            print_json(&json!({ "files": files }))
        }
        Command::Analogy { checkpoint, x, xbar, y, top } => {
            let report = pipeline::read_report(&checkpoint)?;
            let ranked = evalkit::analogy(&report.type_vectors, &x, &xbar, &y)?;
            let rows: Vec<_> = ranked.into_iter().take(top).map(|(t, d)| json!({ "type": t, "distance": d })).collect();
            print_json(&json!({ "query": [x, xbar, y], "ranking": rows }))
        }
        Command::Netgen { count, seed, lib, envelope, out } => {
            let l = if lib.libs.is_empty() && lib.synthetic.is_none() {
                LibArgs { synthetic: Some(SynthKind::Asap7Like), ..lib }.load()?
            } else {
                lib.load()?
            };
            let env = match envelope {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p).with_context(|| p.display().to_string())?)
                    .with_context(|| format!("{}: invalid envelope", p.display()))?,
                None => Envelope::default(),
            };
            let nets = netgen::generate_many(&l, seed, count, &env)?;
            std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            let mut stats = Vec::new();
            for (i, n) in nets.iter().enumerate() {
                n.write(&out.join(format!("netlist_{i:05}.json")))?;
                stats.push(n.stats());
            }
            let mean = |f: fn(&netgen::NetlistStats) -> usize| {
                stats.iter().map(|s| f(s) as f64).sum::<f64>() / stats.len().max(1) as f64
            };
            print_json(&json!({
                "out": out,
                "count": nets.len(),
                "mean": {
                    "cells": mean(|s| s.cells),
                    "ports": mean(|s| s.ports),
                    "edges": mean(|s| s.edges),
                    "levels": mean(|s| s.levels),
                },
            }))
        }
        Command::Simulate { netlist, vectors, seed, mode, out } => {
            let n = Netlist::read(&netlist)?;
            let ports = n.ports.len();
            let pats = match mode {
                SimMode::Auto => netgen::auto_patterns(ports, vectors, seed),
                SimMode::Exact => {
                    if ports > 24 {
                        bail!(PipelineError::Config(format!("{ports} ports are too many to enumerate")));
                    }
                    Patterns::exhaustive(ports)
                }
                SimMode::Random => Patterns::random(ports, vectors, seed),
            };
            let labels = netgen::simulate(&n, &pats)?;
            let bytes = labels.to_jsonl();
            match out {
                Some(p) => lib2vec::write_atomic(&p, &bytes).with_context(|| p.display().to_string())?,
                None => std::io::stdout().lock().write_all(&bytes)?,
            }
            Ok(())
        }
        Command::Pipeline { config, lib, out, d, seed, epochs, slew_points, load_points } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::read(p)?,
                None => RunConfig::default(),
            };
            lib.apply(&mut cfg);
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(d) = d {
                cfg.train.d = d;
                cfg.train.d_elec = d;
            }
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(e) = epochs {
                cfg.train.func.epochs = e;
                cfg.train.elec.epochs = e;
            }
            cfg.grid =
                GridDims { slew: slew_points.unwrap_or(cfg.grid.slew), load: load_points.unwrap_or(cfg.grid.load) };
            let summary = pipeline::run_pipeline(&cfg)?;
            print_json(&serde_json::to_value(&summary)?)
        }
        Command::SynthLib { kind, out } => {
            let text = lib2vec::synth::synth_liberty(&SyntheticLibrary::from(kind).spec());
            lib2vec::write_atomic(&out, text.as_bytes()).with_context(|| out.display().to_string())?;
            let lib = lib2vec::liberty::parse_liberty(&text)?;
            let catalog = FunctionCatalog::build(&lib);
            let types: BTreeMap<&str, usize> = catalog.types.iter().map(|(k, v)| (k.as_str(), v.cells.len())).collect();
            print_json(&json!({ "out": out, "cells": lib.cells.len(), "types": types }))
        }
    }
}

/// Short machine-readable error class.
fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(EvalError::DimensionMismatch(_)) = cause.downcast_ref::<EvalError>() {
            return "dimension_mismatch";
        }
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            match p {
                PipelineError::Config(_) => return "config",
                PipelineError::Eval(EvalError::DimensionMismatch(_)) => return "dimension_mismatch",
                _ => {}
            }
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<lib2vec::liberty::LibertyError>().is_some() {
            return "liberty";
        }
        if cause.downcast_ref::<lib2vec::netgen::NetgenError>().is_some() {
            return "netgen";
        }
    }
    "runtime"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({ "error": error_kind(&e), "message": format!("{e:#}") });
            eprintln!("{report}");
            ExitCode::from(1)
        }
    }
}
