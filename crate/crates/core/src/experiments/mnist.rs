//! MNIST pipelines: parity (binary) and digits (ten classes). Networks are
//! trained on centered, normalized images; attacks act on raw pixels through
//! [`Normalized`] and are clipped to `[0, 1]`.

use std::path::{Path, PathBuf};

use ndarray::Axis;
use serde::Serialize;

use super::{ExperimentConfig, ExperimentKind, MnistConfig, Output};
use crate::attacks::{robust_accuracy, AttackSpec, Norm, Normalized};
use crate::data::{
    load_mnist_dir, preprocess_digits, preprocess_parity, Dataset, MnistSplit, Provenance, Targets, MNIST_FILES,
};
use crate::net::{accuracy, init_kaiming, stable_rank, train, History, Monitor, PreluNet};
use crate::{rng, Error, Result};

/// `mnist.dir` if set, otherwise `$MNIST_DIR`.
pub fn mnist_dir(m: &MnistConfig) -> Result<PathBuf> {
    if let Some(d) = &m.dir {
        return Ok(d.clone());
    }
    match std::env::var_os("MNIST_DIR") {
        Some(d) if !d.is_empty() => Ok(PathBuf::from(d)),
        _ => {
            Err(Error::MissingData { expected: MNIST_FILES.iter().map(|f| Path::new("$MNIST_DIR").join(f)).collect() })
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AttackCell {
    pub p: f64,
    pub norm: Norm,
    pub radius: f64,
    pub robust_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct MnistRun {
    pub p: f64,
    pub net: PreluNet,
    pub history: History,
    pub test_acc: f64,
    /// Stable rank of the hidden features of the training set.
    pub stable_rank: f64,
}

#[derive(Debug, Clone)]
pub struct MnistReport {
    pub runs: Vec<MnistRun>,
    pub attacks: Vec<AttackCell>,
}

impl MnistReport {
    pub fn run(&self, p: f64) -> Option<&MnistRun> {
        self.runs.iter().find(|r| r.p == p)
    }

    pub fn robust(&self, p: f64, norm: Norm, radius: f64) -> Option<f64> {
        self.attacks
            .iter()
            .find(|c| c.p == p && c.norm == norm && (c.radius - radius).abs() < 1e-12)
            .map(|c| c.robust_accuracy)
    }
}

/// Raw test pixels with the same targets as the preprocessed test set.
fn raw_attack_set(test: &MnistSplit, pre: &Dataset, n: usize) -> Result<Dataset> {
    let n = n.min(test.len());
    let idx: Vec<usize> = (0..n).collect();
    let targets = match &pre.targets {
        Targets::Binary { y, .. } => Targets::Binary { y: y[..n].to_vec(), z: None },
        Targets::Multiclass { labels, classes } => {
            Targets::Multiclass { labels: labels[..n].to_vec(), classes: *classes }
        }
    };
    Dataset::new(test.images.select(Axis(0), &idx), targets, Provenance::MnistRaw)
}

pub fn run_mnist(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<MnistReport> {
    let m = cfg.mnist.as_ref().ok_or_else(|| Error::Config("MNIST runs need a [mnist] table".into()))?;
    let digits = match cfg.experiment {
        ExperimentKind::MnistParity => false,
        ExperimentKind::MnistDigits => true,
        other => return Err(Error::Config(format!("{other:?} is not an MNIST experiment"))),
    };
    let (train_split, test_split) = load_mnist_dir(&mnist_dir(m)?)?;
    let train_split = match m.n_train {
        Some(n) => train_split.truncate(n),
        None => train_split,
    };
    let (tr, te) = if digits {
        preprocess_digits(&train_split, &test_split)?
    } else {
        preprocess_parity(&train_split, &test_split)?
    };
    let mean = train_split.images.mean_axis(Axis(0)).expect("nonempty training split");
    let attack_set = raw_attack_set(&test_split, &te, m.n_attack)?;

    let mut grid: Vec<(Norm, f64)> = m.linf_radii.iter().map(|&r| (Norm::Linf, r)).collect();
    grid.extend(m.l2_radii.iter().map(|&r| (Norm::L2, r)));
    grid.extend(m.l1_radii.iter().map(|&r| (Norm::L1, r)));

    let mut runs = Vec::new();
    let mut attacks = Vec::new();
    for (i, &p) in m.ps.iter().enumerate() {
        let net = init_kaiming(m.h, tr.dim(), tr.outputs(), p, rng::derive(m.train.seed, 0x100 + i as u64))?;
        let (net, history) =
            train(net, &tr, &m.train, &mut Monitor { test: Some(&te), stable_rank: true, hook: None })?;
        if let Some(o) = out {
            let mut w = o.csv(&format!("history_p{p}.csv"))?;
            history.write_csv(&mut w)?;
            w.flush()?;
        }
        let test_acc = accuracy(&net, &te)?;
        let sr = stable_rank(net.features(tr.x.view())?.view())?;
        let model = Normalized { inner: &net, mean: mean.clone() };
        for &(norm, radius) in &grid {
            let robust = if radius == 0.0 {
                robust_accuracy(
                    &model,
                    &attack_set,
                    &AttackSpec { radius: 0.0, norm: Norm::L2, adaptive: false, steps: 1, restarts: 1, ..m.attack },
                )?
                .clean_accuracy
            } else {
                // APGD is the l-infinity attack; the other norms use PGD with the same budget.
                let spec = AttackSpec { norm, radius, adaptive: m.attack.adaptive && norm == Norm::Linf, ..m.attack };
                robust_accuracy(&model, &attack_set, &spec)?.robust_accuracy
            };
            attacks.push(AttackCell { p, norm, radius, robust_accuracy: robust });
        }
        runs.push(MnistRun { p, net, history, test_acc, stable_rank: sr });
    }

    if let Some(o) = out {
        let mut w = o.csv("summary.csv")?;
        w.write_record(["p", "test_acc", "stable_rank"])?;
        for r in &runs {
            w.write_record([r.p.to_string(), r.test_acc.to_string(), r.stable_rank.to_string()])?;
        }
        w.flush()?;
        let mut w = o.csv("robustness.csv")?;
        for c in &attacks {
            w.serialize(c)?;
        }
        w.flush()?;
    }
    Ok(MnistReport { runs, attacks })
}
