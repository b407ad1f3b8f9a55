//! Early gradient-flow dynamics on the simplified dataset, emulated by small
//! explicit Euler steps: the small-norm phase, the alignment-phase residual
//! against the extremal field, and the step-size scaling of balancedness.

use ndarray::Array1;
use serde::Serialize;

use super::extremal::{rotation_field, ExtremalField};
use crate::data::{simplified_dataset, Dataset, SubclassBasis};
use crate::net::{init_balanced, objective_gradient, DirectionLaw, InitSpec, LossKind, PreluNet, Reduction};
use crate::{linalg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallNormSpec {
    pub p: f64,
    pub h: usize,
    pub epsilon: f64,
    pub step: f64,
    pub seed: u64,
}

impl SmallNormSpec {
    /// `ε = 1e−4`, `h = 64`, step `1e−4`.
    pub fn new(p: f64, seed: u64) -> Self {
        Self { p, h: 64, epsilon: 1e-4, step: 1e-4, seed }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallNormReport {
    /// `(1/4K)·log(1/(√h·ε))`.
    pub horizon: f64,
    pub steps: usize,
    pub max_norm_sq: f64,
    /// `2εM²/√h`.
    pub norm_bound: f64,
    pub max_output: f64,
    /// `2ε√h·M²`.
    pub output_bound: f64,
    /// Largest `‖Δŵ/η − sign(v_j(0))·P⊥x^(p)‖` seen along the trajectory.
    pub max_residual: f64,
    /// Largest ratio of that residual to `2Kp·max|f| + 6‖Δw/‖w‖‖²/η`.
    pub residual_ratio: f64,
}

impl SmallNormReport {
    pub fn norm_ok(&self) -> bool {
        self.max_norm_sq <= self.norm_bound && self.max_output <= self.output_bound
    }

    pub fn residual_ok(&self) -> bool {
        self.residual_ratio <= 1.0
    }
}

fn directions(net: &PreluNet) -> Vec<Array1<f64>> {
    net.w
        .rows()
        .into_iter()
        .map(|r| {
            let n = linalg::norm(r);
            if n > 0.0 {
                r.to_owned() / n
            } else {
                r.to_owned()
            }
        })
        .collect()
}

fn max_output(net: &PreluNet, data: &Dataset) -> Result<f64> {
    let out = net.forward_batch(data.x.view())?;
    Ok(out.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
}

fn euler_step(net: &mut PreluNet, data: &Dataset, eta: f64) -> Result<()> {
    let (_, g) = objective_gradient(net, data, LossKind::Exponential, Reduction::Sum)?;
    net.w.scaled_add(-eta, &g.w);
    net.v.scaled_add(-eta, &g.v);
    Ok(())
}

/// Runs Euler steps of the summed exponential loss on the simplified dataset
/// from a balanced uniform-law initialization (`M = 1`) up to the horizon of
/// the small-norm bound, tracking norms, outputs and the alignment residual.
pub fn small_norm_phase(basis: &SubclassBasis, spec: &SmallNormSpec) -> Result<SmallNormReport> {
    small_norm_phase_in(&ExtremalField::new(simplified_dataset(basis), spec.p)?, spec)
}

/// [`small_norm_phase`] on the dataset of `field`, comparing directions
/// against that field.
pub fn small_norm_phase_in(field: &ExtremalField, spec: &SmallNormSpec) -> Result<SmallNormReport> {
    if field.p() != spec.p {
        return Err(Error::InvalidParameter(format!("field has p = {}, spec has p = {}", field.p(), spec.p)));
    }
    let h = spec.h as f64;
    let m = 1.0;
    if !(spec.epsilon > 0.0 && spec.epsilon <= 1.0 / (4.0 * h.sqrt() * m * m)) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1/(4 sqrt(h) M^2)], got {}",
            spec.epsilon
        )));
    }
    if !(spec.step > 0.0) {
        return Err(Error::InvalidParameter("step must be > 0".into()));
    }
    let data = field.dataset().clone();
    let k = data.len() as f64;
    let horizon = (1.0 / (h.sqrt() * spec.epsilon)).ln() / (4.0 * k);
    let steps = (horizon / spec.step).floor() as usize;

    let init = InitSpec::new(spec.epsilon, DirectionLaw::Uniform, spec.seed)?;
    let mut net = init_balanced(spec.h, data.dim(), 1, spec.p, &init)?;
    let signs: Vec<f64> = net.v.column(0).iter().map(|v| v.signum()).collect();

    // The forward difference of the direction over one Euler step differs
    // from the instantaneous rate `P⊥Δw/(η‖w‖)` by at most `6‖u‖²/η` with
    // `u = Δw/‖w‖` (second-order remainder of `w ↦ w/‖w‖` for ‖u‖ ≤ 1/2);
    // that is the O(step) allowance on top of the `2Kp·max|f|` term.
    let mut outputs = vec![max_output(&net, &data)?];
    let mut max_norm_sq = net.row_norms().iter().fold(0.0, |a: f64, &b| a.max(b * b));
    let mut max_residual = 0.0f64;
    let mut residual_ratio = 0.0f64;
    for _ in 0..steps {
        let prev = net.clone();
        let base = 2.0 * k * spec.p * outputs[outputs.len() - 1];
        euler_step(&mut net, &data, spec.step)?;
        max_norm_sq = net.row_norms().iter().fold(max_norm_sq, |a, &b| a.max(b * b));
        outputs.push(max_output(&net, &data)?);
        let (d0, d1) = (directions(&prev), directions(&net));
        for j in 0..spec.h {
            let w = prev.w.row(j);
            let nw = linalg::norm(w);
            if nw == 0.0 {
                continue;
            }
            let fd = (&d1[j] - &d0[j]) / spec.step;
            let pred = rotation_field(field, w)? * signs[j];
            let resid = linalg::norm((&fd - &pred).view());
            let u = linalg::norm((&net.w.row(j) - &w).view()) / nw;
            let allowed = base + if u <= 0.5 { 6.0 * u * u / spec.step } else { f64::INFINITY };
            max_residual = max_residual.max(resid);
            if allowed > 0.0 {
                residual_ratio = residual_ratio.max(resid / allowed);
            } else if resid > 0.0 {
                residual_ratio = f64::INFINITY;
            }
        }
    }
    let max_out = outputs.iter().copied().fold(0.0, f64::max);
    Ok(SmallNormReport {
        horizon,
        steps,
        max_norm_sq,
        norm_bound: 2.0 * spec.epsilon * m * m / h.sqrt(),
        max_output: max_out,
        output_bound: 2.0 * spec.epsilon * h.sqrt() * m * m,
        max_residual,
        residual_ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftScaling {
    pub steps: Vec<f64>,
    pub drifts: Vec<f64>,
    /// Least-squares slope of `log drift` against `log η`.
    pub slope: f64,
}

/// Balancedness drift `max_j |v_j² − ‖w_j‖²|` after one Euler step of each
/// size, starting from `net`, and the log-log slope across step sizes.
pub fn drift_scaling(net: &PreluNet, data: &Dataset, loss: LossKind, steps: &[f64]) -> Result<DriftScaling> {
    if steps.len() < 2 || steps.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("need at least two positive step sizes".into()));
    }
    let (_, g) = objective_gradient(net, data, loss, Reduction::Sum)?;
    let mut drifts = Vec::with_capacity(steps.len());
    for &eta in steps {
        let mut n = net.clone();
        n.w.scaled_add(-eta, &g.w);
        n.v.scaled_add(-eta, &g.v);
        drifts.push(n.balancedness_drift());
    }
    if drifts.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Domain("zero drift: the slope is undefined".into()));
    }
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = drifts.iter().map(|d| d.ln()).collect();
    Ok(DriftScaling { steps: steps.to_vec(), drifts, slope: ls_slope(&xs, &ys) })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
