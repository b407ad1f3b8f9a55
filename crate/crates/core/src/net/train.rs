use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{loss_derivative, loss_value, softmax_cross_entropy, Gradient, LossKind, PreluNet};
use crate::data::{Dataset, Targets};
use crate::{linalg, rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    Adam {
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "adam_eps")]
        eps: f64,
    },
}

fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn adam_eps() -> f64 {
    1e-8
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: beta1(), beta2: beta2(), eps: adam_eps() }
    }
}

/// How per-sample losses are combined into the objective being optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// `Σ_i ℓ_i`: the objective of the gradient-flow analysis.
    Sum,
    #[default]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub optimizer: Optimizer,
    pub step_size: f64,
    /// Batches larger than the dataset mean full-batch steps.
    pub batch_size: usize,
    /// Upper bound on epochs; with `target_loss` training may stop earlier.
    pub epochs: usize,
    pub seed: u64,
    /// Record a snapshot every this many epochs (and after the last one).
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub reduction: Reduction,
    /// Stop once the mean training loss of an epoch falls below this value.
    #[serde(default)]
    pub target_loss: Option<f64>,
}

fn one() -> usize {
    1
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidParameter("step size must be > 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.record_every == 0 {
            return Err(Error::InvalidParameter("batch size, epochs and record cadence must be >= 1".into()));
        }
        Ok(())
    }
}

/// State passed to the monitoring hook at each recording point.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub iteration: usize,
    /// Mean training loss at the current weights.
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub stable_rank: Option<f64>,
    pub max_balancedness_drift: f64,
    pub neuron_norms: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub stable_rank: Option<f64>,
    pub max_balancedness_drift: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub rows: Vec<HistoryRow>,
    pub iterations: usize,
    pub epochs_run: usize,
    pub reached_target: bool,
}

impl History {
    pub fn header() -> [&'static str; 6] {
        ["epoch", "loss", "train_acc", "test_acc", "stable_rank", "max_balancedness_drift"]
    }

    pub fn write_csv<W: std::io::Write>(&self, wr: &mut csv::Writer<W>) -> Result<()> {
        wr.write_record(Self::header())?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        for r in &self.rows {
            wr.write_record([
                r.epoch.to_string(),
                format!("{:.10e}", r.loss),
                format!("{:.6}", r.train_acc),
                opt(r.test_acc),
                opt(r.stable_rank),
                format!("{:.10e}", r.max_balancedness_drift),
            ])?;
        }
        Ok(())
    }
}

/// Called at each recording point with the row just recorded.
pub type TrainHook<'a> = &'a mut dyn FnMut(&Snapshot, &PreluNet);

/// Optional extras evaluated at recording points.
#[derive(Default)]
pub struct Monitor<'a> {
    pub test: Option<&'a Dataset>,
    /// Compute the stable rank of the training hidden features.
    pub stable_rank: bool,
    pub hook: Option<TrainHook<'a>>,
}

/// Loss (summed over the selected rows) and its derivative with respect to
/// each output.
fn loss_and_upstream(
    out: &Array2<f64>,
    targets: &Targets,
    idx: &[usize],
    kind: LossKind,
) -> Result<(f64, Array2<f64>)> {
    let mut g = Array2::zeros(out.raw_dim());
    let mut total = 0.0;
    match targets {
        Targets::Binary { y, .. } => {
            for (r, &i) in idx.iter().enumerate() {
                let yhat = out[[r, 0]];
                total += loss_value(y[i], yhat, kind);
                g[[r, 0]] = loss_derivative(y[i], yhat, kind);
            }
        }
        Targets::Multiclass { labels, .. } => {
            if kind != LossKind::CrossEntropy {
                return Err(Error::InvalidParameter(format!("{kind:?} loss needs binary labels")));
            }
            for (r, &i) in idx.iter().enumerate() {
                let (v, d) = softmax_cross_entropy(out.row(r), labels[i]);
                total += v;
                g.row_mut(r).assign(&d);
            }
        }
    }
    Ok((total, g))
}

fn correct(out: &Array2<f64>, targets: &Targets, idx: &[usize]) -> usize {
    match targets {
        Targets::Binary { y, .. } => idx.iter().enumerate().filter(|&(r, &i)| out[[r, 0]] * y[i] > 0.0).count(),
        Targets::Multiclass { labels, .. } => {
            idx.iter().enumerate().filter(|&(r, &i)| argmax(out.row(r)) == labels[i]).count()
        }
    }
}

pub(crate) fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of correctly classified samples (binary: `y·f(x) > 0`).
pub fn accuracy(net: &PreluNet, ds: &Dataset) -> Result<f64> {
    let out = net.forward_batch(ds.x.view())?;
    let idx: Vec<usize> = (0..ds.len()).collect();
    Ok(correct(&out, &ds.targets, &idx) as f64 / ds.len() as f64)
}

fn mean_loss(net: &PreluNet, ds: &Dataset, kind: LossKind) -> Result<(f64, f64)> {
    let out = net.forward_batch(ds.x.view())?;
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (l, _) = loss_and_upstream(&out, &ds.targets, &idx, kind)?;
    let acc = correct(&out, &ds.targets, &idx) as f64 / ds.len() as f64;
    Ok((l / ds.len() as f64, acc))
}

/// Training objective `Σ_i ℓ_i` (or its mean) and its parameter gradient.
pub fn objective_gradient(
    net: &PreluNet,
    data: &Dataset,
    kind: LossKind,
    reduction: Reduction,
) -> Result<(f64, Gradient)> {
    let out = net.forward_batch(data.x.view())?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let (mut l, mut g) = loss_and_upstream(&out, &data.targets, &idx, kind)?;
    if reduction == Reduction::Mean {
        l /= data.len() as f64;
        g /= data.len() as f64;
    }
    Ok((l, net.backward(data.x.view(), g.view())?))
}

pub fn objective(net: &PreluNet, data: &Dataset, kind: LossKind, reduction: Reduction) -> Result<f64> {
    let out = net.forward_batch(data.x.view())?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let (l, _) = loss_and_upstream(&out, &data.targets, &idx, kind)?;
    Ok(match reduction {
        Reduction::Sum => l,
        Reduction::Mean => l / data.len() as f64,
    })
}

/// Central finite differences of `f` with respect to every parameter.
pub fn finite_difference_gradient<F>(net: &PreluNet, step: f64, f: F) -> Gradient
where
    F: Fn(&PreluNet) -> f64,
{
    let mut probe = net.clone();
    let mut gw = Array2::zeros(net.w.raw_dim());
    for ((i, j), g) in gw.indexed_iter_mut() {
        let orig = net.w[[i, j]];
        probe.w[[i, j]] = orig + step;
        let up = f(&probe);
        probe.w[[i, j]] = orig - step;
        let down = f(&probe);
        probe.w[[i, j]] = orig;
        *g = (up - down) / (2.0 * step);
    }
    let mut gv = Array2::zeros(net.v.raw_dim());
    for ((i, j), g) in gv.indexed_iter_mut() {
        let orig = net.v[[i, j]];
        probe.v[[i, j]] = orig + step;
        let up = f(&probe);
        probe.v[[i, j]] = orig - step;
        let down = f(&probe);
        probe.v[[i, j]] = orig;
        *g = (up - down) / (2.0 * step);
    }
    Gradient { w: gw, v: gv }
}

impl Gradient {
    /// Euclidean norm over all parameters.
    pub fn norm(&self) -> f64 {
        (self.w.mapv(|x| x * x).sum() + self.v.mapv(|x| x * x).sum()).sqrt()
    }

    /// `‖self − other‖ / max(‖self‖, ‖other‖)` over all parameters.
    pub fn relative_error(&self, other: &Gradient) -> f64 {
        let diff = (&self.w - &other.w).mapv(|x| x * x).sum() + (&self.v - &other.v).mapv(|x| x * x).sum();
        let a = self.w.mapv(|x| x * x).sum() + self.v.mapv(|x| x * x).sum();
        let b = other.w.mapv(|x| x * x).sum() + other.v.mapv(|x| x * x).sum();
        let scale = a.max(b).sqrt();
        if scale == 0.0 {
            0.0
        } else {
            diff.sqrt() / scale
        }
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Gradient,
    s: Gradient,
}

impl Adam {
    fn new(net: &PreluNet, beta1: f64, beta2: f64, eps: f64) -> Self {
        let z = || Gradient { w: Array2::zeros(net.w.raw_dim()), v: Array2::zeros(net.v.raw_dim()) };
        Self { beta1, beta2, eps, t: 0, m: z(), s: z() }
    }

    fn step(&mut self, net: &mut PreluNet, g: &Gradient, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let upd = |param: &mut Array2<f64>, m: &mut Array2<f64>, s: &mut Array2<f64>, g: &Array2<f64>| {
            ndarray::Zip::from(param).and(m).and(s).and(g).for_each(|p, m, s, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *s = b2 * *s + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*s / c2).sqrt() + eps);
            });
        };
        upd(&mut net.w, &mut self.m.w, &mut self.s.w, &g.w);
        upd(&mut net.v, &mut self.m.v, &mut self.s.v, &g.v);
    }
}

/// Neuron with a non-finite parameter, or failing that the largest one.
fn offending_neuron(net: &PreluNet) -> Option<usize> {
    let bad =
        net.w.rows().into_iter().zip(net.v.rows()).position(|(w, v)| w.iter().chain(v.iter()).any(|x| !x.is_finite()));
    bad.or_else(|| net.contributions().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j))
}

/// Mini-batch training with seeded shuffling.
///
/// Returns the final network and the recorded history. A non-finite loss
/// aborts with [`Error::Divergence`].
pub fn train(
    mut net: PreluNet,
    data: &Dataset,
    cfg: &TrainConfig,
    monitor: &mut Monitor<'_>,
) -> Result<(PreluNet, History)> {
    cfg.validate()?;
    if data.dim() != net.dim() {
        return Err(Error::DimensionMismatch { expected: net.dim(), got: data.dim() });
    }
    if data.outputs() != net.outputs() {
        return Err(Error::DimensionMismatch { expected: net.outputs(), got: data.outputs() });
    }
    let n = data.len();
    let bs = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng::stream(cfg.seed, 0x5bff);
    let mut adam = match cfg.optimizer {
        Optimizer::Adam { beta1, beta2, eps } => Some(Adam::new(&net, beta1, beta2, eps)),
        Optimizer::Sgd => None,
    };
    let mut history = History::default();
    let mut iteration = 0usize;

    for epoch in 1..=cfg.epochs {
        if bs < n {
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(bs) {
            let xb = if bs == n && chunk.len() == n { None } else { Some(data.x.select(Axis(0), chunk)) };
            let xv = xb.as_ref().map_or(data.x.view(), |x| x.view());
            let out = net.forward_batch(xv)?;
            let (l, mut g) = loss_and_upstream(&out, &data.targets, chunk, cfg.loss)?;
            iteration += 1;
            if !l.is_finite() {
                return Err(Error::Divergence { iteration, neuron: offending_neuron(&net) });
            }
            epoch_loss += l;
            if cfg.reduction == Reduction::Mean {
                g /= chunk.len() as f64;
            }
            let grad = net.backward(xv, g.view())?;
            match adam.as_mut() {
                Some(a) => a.step(&mut net, &grad, cfg.step_size),
                None => {
                    net.w.scaled_add(-cfg.step_size, &grad.w);
                    net.v.scaled_add(-cfg.step_size, &grad.v);
                }
            }
        }
        history.epochs_run = epoch;
        let mean = epoch_loss / n as f64;
        let reached = cfg.target_loss.is_some_and(|t| mean < t);
        if epoch % cfg.record_every == 0 || epoch == cfg.epochs || reached {
            let (loss, train_acc) = mean_loss(&net, data, cfg.loss)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { iteration, neuron: offending_neuron(&net) });
            }
            let test_acc = monitor.test.map(|t| accuracy(&net, t)).transpose()?;
            let stable_rank = if monitor.stable_rank {
                let f = net.features(data.x.view())?;
                linalg::stable_rank(f.view()).ok()
            } else {
                None
            };
            let snap = Snapshot {
                epoch,
                iteration,
                loss,
                train_acc,
                test_acc,
                stable_rank,
                max_balancedness_drift: net.balancedness_drift(),
                neuron_norms: net.row_norms(),
            };
            if let Some(h) = monitor.hook.as_mut() {
                h(&snap, &net);
            }
            history.rows.push(HistoryRow {
                epoch,
                loss,
                train_acc,
                test_acc,
                stable_rank,
                max_balancedness_drift: snap.max_balancedness_drift,
            });
        }
        if reached {
            history.reached_target = true;
            break;
        }
    }
    history.iterations = iteration;
    Ok((net, history))
}
