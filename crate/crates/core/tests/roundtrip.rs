// SPDX-License-Identifier: Apache-2.0

//! Cross-module round trips: files written by one stage and read by the next.

use lib2vec::datagen::{self, DataConfig};
use lib2vec::evalkit::{self, TrainSettings};
use lib2vec::liberty::parse_liberty;
use lib2vec::nn::{FunctionalModel, TrainConfig};
use lib2vec::pipeline::{self, write_model_dir};
use lib2vec::synth::{synth_liberty, SynthSpec};
use lib2vec::testgen::{build_condition_grid, score_funsim, ElectricalSampling, TestSuite};

fn trained(dir: &std::path::Path) -> (lib2vec::liberty::Library, evalkit::Trained, TestSuite) {
    let lib = parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap();
    let grid = build_condition_grid(&lib, 3, 3).unwrap();
    pipeline::generate_datasets(&lib, &grid, &DataConfig::default(), true, &dir.join("data")).unwrap();
    let data = datagen::read_datasets(&dir.join("data")).unwrap();
    let cfg = TrainConfig { epochs: 5, batch_size: 16, lr: 3e-3, ..Default::default() };
    let s = TrainSettings { d: 6, d_elec: 5, hidden: 8, out_hidden: 8, func: cfg.clone(), elec: cfg, init_seed: 3 };
    let t = evalkit::train(&lib, &data, &s, "h").unwrap();
    let suite = TestSuite::generate(&lib, &grid, &ElectricalSampling::default());
    (lib, t, suite)
}

#[test]
fn csv_export_rescores_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (_, t, suite) = trained(dir.path());
    let in_memory = score_funsim(&suite.funsim, &t.report.type_vectors).unwrap();
    evalkit::export_vectors(&t.report, &dir.path().join("csv")).unwrap();
    let rows = evalkit::read_vectors_csv(&dir.path().join("csv/functional_types.csv")).unwrap();
    let from_csv = rows.into_iter().map(|(n, (_, v))| (n, v)).collect();
    assert_eq!(score_funsim(&suite.funsim, &from_csv).unwrap(), in_memory);
}

#[test]
fn model_directory_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let (_, t, suite) = trained(dir.path());
    let model = dir.path().join("model");
    write_model_dir(&model, &t).unwrap();
    let report = pipeline::read_report(&model.join("report.json")).unwrap();
    assert_eq!(report, t.report);
    let f = FunctionalModel::load(&model.join("functional.json")).unwrap();
    assert_eq!(f.params, t.functional.params);
    let e = pipeline::load_electrical(&model).unwrap().unwrap();
    for entry in report.arc_vectors.iter().take(10) {
        assert_eq!(evalkit::arc_vector(&e, &entry.arc, entry.property).unwrap(), entry.vector);
    }
    let a = evalkit::evaluate(&report, &suite, &[1, 3]).unwrap();
    assert_eq!(a, evalkit::evaluate(&t.report, &suite, &[1, 3]).unwrap());
}

#[test]
fn tests_and_datasets_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let lib = parse_liberty(&synth_liberty(&SynthSpec::toy())).unwrap();
    let grid = build_condition_grid(&lib, 4, 4).unwrap();
    let suite = TestSuite::generate(&lib, &grid, &ElectricalSampling { seed: 9, ..Default::default() });
    suite.write_dir(dir.path()).unwrap();
    assert_eq!(TestSuite::read_dir(dir.path()).unwrap(), suite);
    let m = pipeline::generate_datasets(&lib, &grid, &DataConfig::default(), false, &dir.path().join("d")).unwrap();
    let back = datagen::read_datasets(&dir.path().join("d")).unwrap();
    assert_eq!(back.manifest, m);
    assert_eq!(back.func_out.len(), m.counts["func_out"]);
    assert_eq!(back.elec_out.len(), m.counts["elec_out"]);
}
