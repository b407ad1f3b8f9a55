//! Conjecture validation: train pReLU networks on the subclass model and
//! compare them with `F` (p = 1) or `F^(p)` (p > 1).

use serde::Serialize;

use super::{ExperimentConfig, Output, SynthConfig};
use crate::attacks::robust_accuracy;
use crate::data::{make_basis, sample_synthetic, ClusterSpec, Dataset, SubclassBasis};
use crate::net::{accuracy, init_balanced, train, write_checkpoint, InitSpec, Monitor, PreluNet, TrainConfig};
use crate::reference::{dist_estimate, DistReport, ReferenceClassifier};
use crate::theory::{alignment_report, AlignmentReport};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct TrainedRun {
    pub p: f64,
    pub alpha: f64,
    pub repeat: usize,
    pub iterations: usize,
    pub reached_target: bool,
    pub final_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub dist: f64,
    /// `dist / max_k |ref(μ_k)|`.
    pub normalized_dist: f64,
    pub c_hat: f64,
    pub c_clamped: bool,
}

#[derive(Debug, Clone)]
pub struct MainRun {
    pub run: TrainedRun,
    pub net: PreluNet,
    pub alignment: AlignmentReport,
    /// Smallest best-cosine to `{μ̄₊, μ̄₋}` over the top-contribution neurons.
    pub top_class_average_min: f64,
    /// Smallest best-cosine to `{μ_k}` over the top-contribution neurons.
    pub top_subclass_min: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RobustPoint {
    pub p: f64,
    pub radius: f64,
    pub robust_accuracy: f64,
    pub clean_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct SynthReport {
    pub main: Vec<MainRun>,
    pub sweep: Vec<TrainedRun>,
    pub robustness: Vec<RobustPoint>,
}

impl SynthReport {
    pub fn main_run(&self, p: f64) -> Option<&MainRun> {
        self.main.iter().find(|m| m.run.p == p)
    }

    pub fn robust_at(&self, p: f64, radius: f64) -> Option<f64> {
        self.robustness.iter().find(|r| r.p == p && (r.radius - radius).abs() < 1e-12).map(|r| r.robust_accuracy)
    }
}

pub fn reference_for(p: f64, basis: &SubclassBasis) -> Result<ReferenceClassifier> {
    if p == 1.0 {
        Ok(ReferenceClassifier::f(basis.clone()))
    } else {
        ReferenceClassifier::fp(basis.clone(), p)
    }
}

/// `max_k |ref(μ_k)|`, the scale the distances are reported against.
pub fn reference_scale(r: &ReferenceClassifier) -> Result<f64> {
    let b = r.basis();
    (0..b.k()).map(|k| r.eval(b.center(k)).map(f64::abs)).try_fold(0.0, |m, v| Ok(f64::max(m, v?)))
}

/// Train/test draws for repeat `rep`. The streams do not depend on `α`, so
/// runs at different noise levels are paired.
pub fn synth_data(
    cluster: &ClusterSpec,
    basis: &SubclassBasis,
    n_train: usize,
    n_test: usize,
    rep: usize,
) -> Result<(Dataset, Dataset)> {
    let tr = sample_synthetic(cluster, basis, n_train, &mut rng::stream(cluster.seed, 1 + 2 * rep as u64))?;
    let te = sample_synthetic(cluster, basis, n_test, &mut rng::stream(cluster.seed, 2 + 2 * rep as u64))?;
    Ok((tr, te))
}

struct Trained {
    run: TrainedRun,
    net: PreluNet,
    test: Dataset,
}

fn train_one(
    s: &SynthConfig,
    basis: &SubclassBasis,
    p: f64,
    alpha: f64,
    rep: usize,
    out: Option<&Output>,
) -> Result<Trained> {
    let cluster = ClusterSpec { alpha, ..s.cluster };
    cluster.validate()?;
    let (tr, te) = synth_data(&cluster, basis, s.n_train, s.n_test, rep)?;
    let init = InitSpec { seed: rng::derive(s.init.seed, rep as u64), ..s.init };
    let net = init_balanced(s.h, cluster.d, 1, p, &init)?;
    let tc = TrainConfig { seed: rng::derive(s.train.seed, rep as u64), ..s.train };
    let (net, hist) = train(net, &tr, &tc, &mut Monitor { test: Some(&te), ..Default::default() })?;
    if let Some(o) = out {
        let mut w = o.csv(&format!("history_p{p}_alpha{alpha}_r{rep}.csv"))?;
        hist.write_csv(&mut w)?;
        w.flush()?;
    }
    let reference = reference_for(p, basis)?;
    let DistReport { dist, c_hat, clamped } = dist_estimate(&net, &reference, &s.dist)?;
    let last = hist.rows.last().ok_or_else(|| Error::InvalidParameter("no training epochs recorded".into()))?;
    let run = TrainedRun {
        p,
        alpha,
        repeat: rep,
        iterations: hist.iterations,
        reached_target: hist.reached_target,
        final_loss: last.loss,
        train_acc: last.train_acc,
        test_acc: accuracy(&net, &te)?,
        dist,
        normalized_dist: dist / reference_scale(&reference)?,
        c_hat,
        c_clamped: clamped,
    };
    Ok(Trained { run, net, test: te })
}

fn top_group_order(rep: &AlignmentReport, frac: f64) -> Vec<usize> {
    let mut top = rep.top(frac).to_vec();
    top.sort_by_key(|&j| rep.best_target(j));
    top
}

pub fn run_conjecture_validate(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<SynthReport> {
    let s = cfg.synth.as_ref().ok_or_else(|| Error::Config("conjecture validation needs a [synth] table".into()))?;
    if s.ps.is_empty() || s.repeats == 0 || !(s.top_fraction > 0.0 && s.top_fraction <= 1.0) {
        return Err(Error::Config("synth needs ps, repeats >= 1 and top_fraction in (0, 1]".into()));
    }
    let basis = make_basis(&s.cluster, s.basis)?;
    let mut main = Vec::new();
    let mut robustness = Vec::new();
    for &p in &s.ps {
        let t = train_one(s, &basis, p, s.cluster.alpha, 0, out)?;
        let alignment = alignment_report(&t.net, &basis)?;
        let top = alignment.top(s.top_fraction);
        let top_class_average_min = top.iter().map(|&j| alignment.best_class_average(j)).fold(f64::INFINITY, f64::min);
        let top_subclass_min = top.iter().map(|&j| alignment.best_subclass(j)).fold(f64::INFINITY, f64::min);
        if let Some(o) = out {
            let mut w = o.csv(&format!("alignment_p{p}.csv"))?;
            alignment.write_csv(&mut w, &alignment.order)?;
            w.flush()?;
            let mut w = o.csv(&format!("alignment_top_grouped_p{p}.csv"))?;
            alignment.write_csv(&mut w, &top_group_order(&alignment, s.top_fraction))?;
            w.flush()?;
            let f = std::fs::File::create(o.dir().join(format!("net_p{p}.ckpt")))?;
            write_checkpoint(&t.net, std::io::BufWriter::new(f))?;
        }
        for &r in &s.radii {
            let spec = crate::attacks::AttackSpec { radius: r, ..s.attack };
            let rep = robust_accuracy(&t.net, &t.test, &spec)?;
            robustness.push(RobustPoint {
                p,
                radius: r,
                robust_accuracy: rep.robust_accuracy,
                clean_accuracy: rep.clean_accuracy,
            });
        }
        main.push(MainRun { run: t.run, net: t.net, alignment, top_class_average_min, top_subclass_min });
    }

    let mut sweep = Vec::new();
    for &alpha in &s.alphas {
        for rep in 0..s.repeats {
            for &p in &s.ps {
                if alpha == s.cluster.alpha && rep == 0 {
                    let m = main.iter().find(|m| m.run.p == p).expect("main run exists");
                    sweep.push(m.run.clone());
                } else {
                    sweep.push(train_one(s, &basis, p, alpha, rep, out)?.run);
                }
            }
        }
    }

    if let Some(o) = out {
        let mut w = o.csv("runs.csv")?;
        for r in main.iter().map(|m| &m.run).chain(sweep.iter()) {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = o.csv("robustness.csv")?;
        for r in &robustness {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(SynthReport { main, sweep, robustness })
}
