use std::path::Path;

use ndarray::Array2;
use prelu_core::attacks::Norm;
use prelu_core::data::mnist::encode_idx;
use prelu_core::data::{BasisMode, ClusterSpec, MnistSplit};
use prelu_core::experiments::*;
use prelu_core::net::{read_checkpoint, InitSpec, LossKind, Optimizer, Reduction, TrainConfig};
use prelu_core::reference::DistConfig;
use prelu_core::{rng, Error};
use rand::Rng;

fn tiny_synth(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset("synth-desk", seed).unwrap();
    let s = cfg.synth.as_mut().unwrap();
    s.cluster = ClusterSpec { d: 20, k: 4, k1: 2, alpha: 0.05, seed: s.cluster.seed };
    s.basis = BasisMode::RandomOrthogonal;
    s.h = 16;
    s.n_train = 40;
    s.n_test = 30;
    s.init = InitSpec { epsilon: 1e-3, ..s.init };
    s.train = TrainConfig { batch_size: 40, epochs: 300, record_every: 50, ..s.train };
    s.alphas = vec![0.0, 0.05];
    s.dist = DistConfig { n1: 256, n2: 8, max_iter: 20, ..s.dist };
    s.radii = vec![0.2, 0.5];
    s.attack.steps = 10;
    s.attack.restarts = 1;
    cfg
}

#[test]
fn presets_round_trip_through_toml() {
    for name in PRESETS {
        let cfg = ExperimentConfig::preset(name, 7).unwrap();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg, "{name}");
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        assert_eq!(cfg.hash().unwrap().len(), 64);
    }
    assert!(matches!(ExperimentConfig::preset("nope", 0), Err(Error::Config(_))));
}

#[test]
fn seeds_are_rederived_from_the_root() {
    let a = ExperimentConfig::preset("synth-desk", 1).unwrap();
    let b = ExperimentConfig::preset("synth-desk", 2).unwrap();
    let (sa, sb) = (a.synth.as_ref().unwrap(), b.synth.as_ref().unwrap());
    assert_ne!(sa.cluster.seed, sb.cluster.seed);
    assert_ne!(sa.train.seed, sb.train.seed);
    assert_ne!(sa.init.seed, sa.train.seed);
    assert_eq!(a.clone().with_seed(2), b);
    assert_ne!(a.hash().unwrap(), b.hash().unwrap());
}

#[test]
fn malformed_configs_are_config_errors() {
    let base = ExperimentConfig::preset("radius-closed-form", 0).unwrap().to_toml().unwrap();
    let extra = base.replace("bisections = 12", "bisections = 12\nbogus = 1");
    assert!(matches!(ExperimentConfig::from_toml(&extra), Err(Error::Config(_))));
    let kind = base.replace("critical-radius", "conjecture-validate");
    let err = ExperimentConfig::from_toml(&kind).unwrap_err();
    assert!(err.to_string().contains("[synth]"), "{err}");
    assert!(matches!(ExperimentConfig::from_toml("seed = 1"), Err(Error::Config(_))));
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn synth_runs_are_byte_identical_and_tagged() {
    let cfg = tiny_synth(3);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run_conjecture_validate(&cfg, Some(&Output::create(d1.path(), &cfg).unwrap())).unwrap();
    run_conjecture_validate(&cfg, Some(&Output::create(d2.path(), &cfg).unwrap())).unwrap();

    let files = csv_files(d1.path());
    assert_eq!(files, csv_files(d2.path()));
    for want in [
        "runs.csv",
        "robustness.csv",
        "alignment_p1.csv",
        "alignment_top_grouped_p3.csv",
        "history_p1_alpha0.05_r0.csv",
    ] {
        assert!(files.iter().any(|f| f == want), "missing {want} in {files:?}");
    }
    let hash = cfg.hash().unwrap();
    for f in &files {
        let a = std::fs::read(d1.path().join(f)).unwrap();
        assert_eq!(a, std::fs::read(d2.path().join(f)).unwrap(), "{f} differs");
        let t = read_csv(&d1.path().join(f)).unwrap();
        assert_eq!(t.hash, hash, "{f}");
        assert!(!t.header.is_empty() && !t.rows.is_empty(), "{f}");
    }
    let saved = std::fs::read_to_string(d1.path().join("config.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&saved).unwrap(), cfg);

    // One main run per p, one sweep entry per (alpha, p), the main runs reused.
    assert_eq!(r1.main.len(), 2);
    assert_eq!(r1.sweep.len(), 4);
    let main1 = &r1.main_run(1.0).unwrap().run;
    let again = r1.sweep.iter().find(|r| r.p == 1.0 && r.alpha == 0.05).unwrap();
    assert_eq!(again.dist, main1.dist);
    assert_eq!(r1.robustness.len(), 4);
    let m = r1.main_run(3.0).unwrap();
    assert!(m.top_subclass_min <= 1.0 && m.top_class_average_min <= 1.0);

    let net =
        read_checkpoint(std::io::BufReader::new(std::fs::File::open(d1.path().join("net_p3.ckpt")).unwrap())).unwrap();
    assert_eq!(net, m.net);
}

#[test]
fn crossover_bisection_brackets_a_step() {
    let mut calls = 0;
    let (lo, hi, probes) = crossover(1.5, 10, |r| {
        calls += 1;
        Ok(if r < 0.37 { 1.0 } else { 0.0 })
    })
    .unwrap();
    assert!(lo < 0.37 && 0.37 <= hi);
    assert!((hi - lo - 1.5 / 1024.0).abs() < 1e-15);
    assert_eq!(calls, 11);
    assert_eq!(probes.len(), 11);
    assert!(matches!(crossover(1.0, 4, |_| Ok(0.9)), Err(Error::Domain(_))));
    assert!(crossover(0.0, 4, |_| Ok(0.0)).is_err());
}

#[test]
fn closed_form_crossovers_near_their_predictions() {
    let mut cfg = ExperimentConfig::preset("radius-closed-form", 5).unwrap();
    let r = cfg.radius.as_mut().unwrap();
    r.cluster.d = 200;
    r.n_test = 300;
    r.bisections = 9;
    let rep = run_critical_radius(&cfg, None).unwrap();
    let f = rep.get("F").unwrap();
    assert!((f.predicted.unwrap() - 1.0 / 10f64.sqrt()).abs() < 1e-15);
    assert_eq!(f.brackets_prediction(), Some(true), "{f:?}");
    let f2 = rep.get("F^(2)").unwrap();
    assert!((f2.predicted.unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(f2.brackets_prediction(), Some(true), "{f2:?}");
    cfg.radius.as_mut().unwrap().attack.norm = Norm::Linf;
    assert!(matches!(run_critical_radius(&cfg, None), Err(Error::Config(_))));
}

fn small_theory(flip: bool) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset("theory", 0).unwrap();
    cfg.synth = None;
    cfg.radius = None;
    cfg.theory = Some(TheoryConfig {
        cone_samples: 200,
        grad_configs: 50,
        gp_draws: 50,
        mc_samples: 10_000,
        inject_sign_flip: flip,
    });
    cfg
}

#[test]
fn theory_suite_passes_and_writes_a_manifest() {
    let cfg = small_theory(false);
    let dir = tempfile::tempdir().unwrap();
    let rep = run_theory_suite(&cfg, Some(&Output::create(dir.path(), &cfg).unwrap())).unwrap();
    let failed: Vec<_> = rep.failures().collect();
    assert!(failed.is_empty(), "{failed:#?}");
    for n in [1, 2, 5, 6, 7, 8] {
        assert_eq!(rep.criterion_passed(n), Some(true), "criterion {n}");
    }
    // No [synth]/[radius] tables: those criteria are absent, not passed.
    assert_eq!(rep.criterion_passed(3), None);
    assert_eq!(rep.criterion_passed(4), None);
    let t = read_csv(&dir.path().join("manifest.csv")).unwrap();
    assert_eq!(t.rows.len(), rep.checks.len());
    assert_eq!(&t.header[0], "id");
}

#[test]
fn sign_flip_fails_exactly_the_alignment_checks() {
    let rep = run_theory_suite(&small_theory(true), None).unwrap();
    let failed: Vec<&str> = rep.failures().map(|c| c.id.as_str()).collect();
    let group: Vec<&str> =
        rep.checks.iter().filter(|c| c.group == ALIGNMENT_FIELD_GROUP).map(|c| c.id.as_str()).collect();
    assert_eq!(failed, group);
    assert!(group.iter().any(|id| id.starts_with("cone-signs")));
    assert!(group.contains(&"lambda-positivity"));
}

/// Ten noisy templates in pixel space, written as IDX files.
fn fake_mnist(dir: &Path) {
    let mut r = rng::from_seed(12);
    let templates = Array2::from_shape_fn((10, 784), |(c, p)| if (p * 7 + c * 31) % 10 < 3 { 0.9 } else { 0.05 });
    let mut split = |n: usize| {
        let mut images = Array2::zeros((n, 784));
        let mut labels = Vec::with_capacity(n);
        for (i, mut row) in images.rows_mut().into_iter().enumerate() {
            let c = (i + r.random_range(0..10)) % 10;
            labels.push(c as u8);
            for (p, v) in row.iter_mut().enumerate() {
                *v = (templates[[c, p]] + r.random_range(-0.05..0.05f64)).clamp(0.0, 1.0);
            }
        }
        MnistSplit::new(images, labels).unwrap()
    };
    for (stem, n) in [("train", 300), ("t10k", 60)] {
        let (img, lab) = encode_idx(&split(n), 28, 28);
        std::fs::write(dir.join(format!("{stem}-images-idx3-ubyte")), img).unwrap();
        std::fs::write(dir.join(format!("{stem}-labels-idx1-ubyte")), lab).unwrap();
    }
}

fn tiny_mnist(preset: &str, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(preset, 4).unwrap();
    let m = cfg.mnist.as_mut().unwrap();
    m.dir = Some(dir.to_path_buf());
    m.h = 24;
    m.ps = vec![1.0, 4.0];
    m.train = TrainConfig {
        loss: LossKind::CrossEntropy,
        optimizer: Optimizer::adam(),
        step_size: 1e-2,
        batch_size: 50,
        epochs: 5,
        record_every: 1,
        reduction: Reduction::Mean,
        target_loss: None,
        ..m.train
    };
    m.n_attack = 20;
    m.attack.steps = 5;
    m.linf_radii = vec![0.0, 0.05];
    cfg
}

#[test]
fn mnist_pipeline_on_synthetic_idx_files() {
    let data = tempfile::tempdir().unwrap();
    fake_mnist(data.path());
    for preset in ["mnist-parity", "mnist-digits"] {
        let cfg = tiny_mnist(preset, data.path());
        let out = tempfile::tempdir().unwrap();
        let rep = run_mnist(&cfg, Some(&Output::create(out.path(), &cfg).unwrap())).unwrap();
        assert_eq!(rep.runs.len(), 2);
        for r in &rep.runs {
            assert!(r.test_acc >= 0.9, "{preset} p={} acc {}", r.p, r.test_acc);
            assert!(r.stable_rank >= 1.0);
            assert_eq!(r.history.rows.len(), 5);
            assert!(r.history.rows.iter().all(|h| h.stable_rank.is_some()));
        }
        let cells = if preset == "mnist-digits" { 2 * (2 + 3 + 2) } else { 2 * 2 };
        assert_eq!(rep.attacks.len(), cells, "{preset}");
        let clean = rep.robust(1.0, Norm::Linf, 0.0).unwrap();
        assert!(rep.robust(1.0, Norm::Linf, 0.05).unwrap() <= clean);
        assert!(out.path().join("summary.csv").is_file());
    }
}

#[test]
fn missing_mnist_names_the_expected_files() {
    let empty = tempfile::tempdir().unwrap();
    let cfg = tiny_mnist("mnist-parity", empty.path());
    match run_mnist(&cfg, None) {
        Err(Error::MissingData { expected }) => {
            assert_eq!(expected.len(), 4);
            assert!(expected[0].ends_with("train-images-idx3-ubyte"));
        }
        other => panic!("expected MissingData, got {:?}", other.map(|_| ())),
    }
    let mut cfg = cfg;
    cfg.experiment = ExperimentKind::TheorySuite;
    assert!(matches!(run_mnist(&cfg, None), Err(Error::Config(_))));
}
