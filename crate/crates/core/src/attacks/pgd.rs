use ndarray::{Array1, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ascent_direction, Model, Norm};
use crate::{linalg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub norm: Norm,
    pub radius: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Defaults to `2.5·radius/steps`.
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Momentum with objective-triggered step halving (ℓ∞ only).
    #[serde(default)]
    pub adaptive: bool,
    /// Box the attacked input must stay in, e.g. `[0, 1]` for pixels.
    #[serde(default)]
    pub clip: Option<(f64, f64)>,
}

fn default_steps() -> usize {
    50
}
fn default_restarts() -> usize {
    3
}

impl AttackSpec {
    pub fn new(norm: Norm, radius: f64) -> Self {
        Self {
            norm,
            radius,
            steps: default_steps(),
            step_size: None,
            restarts: default_restarts(),
            seed: 0,
            adaptive: false,
            clip: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be >= 0, got {}", self.radius)));
        }
        if self.steps == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter("steps and restarts must be >= 1".into()));
        }
        if self.adaptive && self.norm != Norm::Linf {
            return Err(Error::InvalidParameter("adaptive attack is l-infinity only".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.step_size.unwrap_or(2.5 * self.radius / self.steps as f64)
    }
}

/// What is being attacked: a binary label `±1` or a class index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Binary(f64),
    Class(usize),
}

/// Signed margin: positive iff correctly classified.
pub fn margin(out: ArrayView1<f64>, label: Label) -> f64 {
    match label {
        Label::Binary(y) => y * out[0],
        Label::Class(c) => {
            let other =
                out.iter().enumerate().filter(|&(i, _)| i != c).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
            out[c] - other
        }
    }
}

/// Gradient of the margin in `x` (the attack descends it).
pub fn margin_gradient<M: Model + ?Sized>(model: &M, x: ArrayView1<f64>, label: Label) -> Array1<f64> {
    let mut g = Array1::zeros(model.outputs());
    match label {
        Label::Binary(y) => g[0] = y,
        Label::Class(c) => {
            let out = model.value(x);
            let other = (0..out.len())
                .filter(|&i| i != c)
                .max_by(|&a, &b| out[a].total_cmp(&out[b]))
                .expect("at least two classes");
            g[c] = 1.0;
            g[other] = -1.0;
        }
    }
    model.input_gradient(x, g.view())
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    pub delta: Array1<f64>,
    /// Attack objective `−margin(x + δ)` at the returned perturbation.
    pub objective: f64,
    /// The gradient vanished at every iterate of every restart.
    pub stagnated: bool,
    /// Best objective after each iteration (restarts concatenated).
    pub trace: Vec<f64>,
}

pub(crate) struct Attacker<'a, M: Model + ?Sized> {
    pub model: &'a M,
    pub x: ArrayView1<'a, f64>,
    pub label: Label,
    pub spec: &'a AttackSpec,
}

impl<M: Model + ?Sized> Attacker<'_, M> {
    pub fn objective(&self, delta: &Array1<f64>) -> f64 {
        let z = &self.x + delta;
        -margin(self.model.value(z.view()).view(), self.label)
    }

    /// Gradient of the objective at `x + δ`.
    pub fn gradient(&self, delta: &Array1<f64>) -> Array1<f64> {
        let z = &self.x + delta;
        -margin_gradient(self.model, z.view(), self.label)
    }

    /// Projects onto the norm ball and, if requested, the input box.
    pub fn project(&self, delta: &mut Array1<f64>) {
        self.spec.norm.project(delta.view_mut(), self.spec.radius);
        if let Some((lo, hi)) = self.spec.clip {
            // Each coordinate moves toward x ∈ box, so the norm only shrinks.
            for (d, &xi) in delta.iter_mut().zip(self.x.iter()) {
                *d = (xi + *d).clamp(lo, hi) - xi;
            }
        }
    }

    pub fn random_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        let d = self.x.len();
        let r = self.spec.radius;
        let mut delta = match self.spec.norm {
            Norm::Linf => Array1::from_shape_fn(d, |_| rng.random_range(-1.0..=1.0) * r),
            Norm::L2 => {
                let u = linalg::unit_sphere(d, rng);
                u * (r * rng.random::<f64>().powf(1.0 / d as f64))
            }
            Norm::L1 => {
                // Laplace direction scaled into the ball.
                let mut e = Array1::from_shape_fn(d, |_| {
                    let s: f64 = rng.random::<f64>();
                    let m = -(1.0 - rng.random::<f64>()).ln();
                    if s < 0.5 {
                        -m
                    } else {
                        m
                    }
                });
                let n = e.iter().map(|v| v.abs()).sum::<f64>();
                if n > 0.0 {
                    e *= r * rng.random::<f64>() / n;
                }
                e
            }
        };
        self.project(&mut delta);
        delta
    }
}

/// Projected gradient ascent on `−margin(x + δ)` over the norm ball.
///
/// Restart 0 starts at `δ = 0`, later restarts at uniform points of the ball.
/// Returns the best perturbation found over all iterates and restarts.
pub fn pgd<M: Model + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x: ArrayView1<f64>,
    label: Label,
    spec: &AttackSpec,
    rng: &mut R,
) -> Result<AttackResult> {
    spec.validate()?;
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    let atk = Attacker { model, x, label, spec };
    let mut best = Array1::zeros(x.len());
    let mut best_obj = atk.objective(&best);
    let mut trace = Vec::with_capacity(spec.steps * spec.restarts);
    let mut any_gradient = false;
    if spec.radius == 0.0 {
        return Ok(AttackResult { delta: best, objective: best_obj, stagnated: true, trace });
    }
    let eta = spec.step();
    for restart in 0..spec.restarts {
        let mut delta = if restart == 0 { Array1::zeros(x.len()) } else { atk.random_start(rng) };
        let obj = atk.objective(&delta);
        if obj > best_obj {
            best_obj = obj;
            best.assign(&delta);
        }
        for _ in 0..spec.steps {
            let g = atk.gradient(&delta);
            let Some(dir) = ascent_direction(spec.norm, g.view()) else {
                trace.push(best_obj);
                break;
            };
            any_gradient = true;
            delta.scaled_add(eta, &dir);
            atk.project(&mut delta);
            let obj = atk.objective(&delta);
            if obj > best_obj {
                best_obj = obj;
                best.assign(&delta);
            }
            trace.push(best_obj);
        }
    }
    Ok(AttackResult { delta: best, objective: best_obj, stagnated: !any_gradient, trace })
}

/// Single signed-gradient step of size `radius` (ℓ∞).
pub fn fgsm<M: Model + ?Sized>(model: &M, x: ArrayView1<f64>, label: Label, spec: &AttackSpec) -> Result<AttackResult> {
    spec.validate()?;
    let atk = Attacker { model, x, label, spec };
    let zero = Array1::zeros(x.len());
    let g = atk.gradient(&zero);
    let Some(dir) = ascent_direction(Norm::Linf, g.view()) else {
        let objective = atk.objective(&zero);
        return Ok(AttackResult { delta: zero, objective, stagnated: true, trace: vec![objective] });
    };
    let mut delta = dir * spec.radius;
    atk.project(&mut delta);
    let (at_step, at_zero) = (atk.objective(&delta), atk.objective(&zero));
    let (delta, objective) = if at_step >= at_zero { (delta, at_step) } else { (zero, at_zero) };
    Ok(AttackResult { delta, objective, stagnated: false, trace: vec![objective] })
}
