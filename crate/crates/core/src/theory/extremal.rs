//! Extremal vectors of the alignment phase and the sign of the induced
//! rotation field on cones around the class and subclass centers.

use ndarray::{Array1, Array2, ArrayView1};
use serde::Serialize;

use crate::data::{Dataset, Provenance};
use crate::net::relu_pow_deriv;
use crate::{linalg, rng, Error, Result};

/// Centers closer than this to a neuron's activation boundary are treated
/// as kinks: sweep samples touching them are rejected.
pub const KINK_TOL: f64 = 1e-8;

/// Rejection sampling gives up after this many draws per accepted sample.
const MAX_DRAWS_PER_SAMPLE: usize = 1000;

/// The simplified training set together with the exponent `p`.
#[derive(Debug, Clone)]
pub struct ExtremalField {
    dataset: Dataset,
    y: Vec<f64>,
    p: f64,
    flipped: bool,
}

impl ExtremalField {
    pub fn new(dataset: Dataset, p: f64) -> Result<Self> {
        if dataset.provenance != Provenance::Simplified {
            return Err(Error::InvalidParameter(format!(
                "extremal fields live on the simplified dataset, got {}",
                dataset.provenance
            )));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        let y = dataset
            .labels_pm()
            .ok_or_else(|| Error::InvalidParameter("simplified dataset must be binary".into()))?
            .to_vec();
        Ok(Self { dataset, y, p, flipped: false })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Negates every extremal vector. A deliberately wrong field, used to
    /// confirm that the checks built on it can fail.
    pub fn with_sign_flip(mut self) -> Self {
        self.flipped = !self.flipped;
        self
    }

    pub fn is_flipped(&self) -> bool {
        self.flipped
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn points(&self) -> &Array2<f64> {
        &self.dataset.x
    }

    fn class_rows(&self, label: f64) -> Vec<usize> {
        (0..self.y.len()).filter(|&k| self.y[k] == label).collect()
    }
}

fn nonzero(w: ArrayView1<f64>, what: &str) -> Result<f64> {
    let n = linalg::norm(w);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Domain(format!("{what} must be a nonzero finite vector")));
    }
    Ok(n)
}

/// Cosines at or below this size are rounding noise around an exact kink
/// and take the zero subgradient.
const ROUNDING_GATE: f64 = 1e-12;

/// `x^(p)(w) = Σ_k γ_k(w)·y_k·x_k·p·cos^{p−1}(x_k, w)` with `γ_k = 1{⟨x_k,w⟩ > 0}`.
pub fn extremal_vector(field: &ExtremalField, w: ArrayView1<f64>) -> Result<Array1<f64>> {
    extremal_vector_gated(field, w, ROUNDING_GATE)
}

/// Same as [`extremal_vector`] but centers with `cos ≤ gate` are inactive.
/// For `gate > 0` this picks the zero subgradient for centers within `gate`
/// of the kink, which is what the cone sweeps need for centers lying exactly
/// orthogonal to the sampled span.
fn extremal_vector_gated(field: &ExtremalField, w: ArrayView1<f64>, gate: f64) -> Result<Array1<f64>> {
    if w.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: w.len() });
    }
    let nw = nonzero(w, "w")?;
    let p = field.p;
    let mut out = Array1::zeros(field.dim());
    for (k, xk) in field.points().rows().into_iter().enumerate() {
        let nx = linalg::norm(xk);
        if nx == 0.0 {
            continue;
        }
        let c = xk.dot(&w) / (nx * nw);
        if c > gate {
            out.scaled_add(field.y[k] * relu_pow_deriv(c, p) / nx, &xk);
        }
    }
    if field.flipped {
        out.mapv_inplace(|v| -v);
    }
    Ok(out)
}

/// `⟨P⊥_w u, t⟩ / ‖t‖` for `P⊥_w = I − wwᵀ/‖w‖²`.
fn projected_rate(u: &Array1<f64>, w: ArrayView1<f64>, target: ArrayView1<f64>) -> f64 {
    let ww = w.dot(&w);
    let radial = u.dot(&w) / ww;
    (u.dot(&target) - radial * w.dot(&target)) / linalg::norm(target)
}

/// Leading-order `d/dt cos(w, target)` of a positive neuron in the alignment
/// phase: `⟨P⊥_w x^(p)(w), target⟩ / ‖target‖`.
pub fn alignment_derivative(field: &ExtremalField, w: ArrayView1<f64>, target: ArrayView1<f64>) -> Result<f64> {
    if target.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: target.len() });
    }
    nonzero(target, "target")?;
    let x = extremal_vector(field, w)?;
    Ok(projected_rate(&x, w, target))
}

/// `P⊥_w x^(p)(w)`: the direction field itself.
pub fn rotation_field(field: &ExtremalField, w: ArrayView1<f64>) -> Result<Array1<f64>> {
    let x = extremal_vector(field, w)?;
    let ww = w.dot(&w);
    let mut out = x.clone();
    out.scaled_add(-x.dot(&w) / ww, &w);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronSign {
    Positive,
    Negative,
}

impl NeuronSign {
    pub fn value(self) -> f64 {
        match self {
            NeuronSign::Positive => 1.0,
            NeuronSign::Negative => -1.0,
        }
    }
}

/// Which direction the cone is centered on. `ClassAverage` means `μ̄₊` for
/// positive neurons and `μ̄₋` for negative ones; `Subclass(k)` is the `k`-th
/// row of the simplified dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTarget {
    ClassAverage,
    Subclass(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub p: f64,
    pub delta: f64,
    pub sign: NeuronSign,
    pub target: SweepTarget,
    pub min: f64,
    pub max: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl SweepSummary {
    pub fn all_positive(&self) -> bool {
        self.min > 0.0
    }

    pub fn all_negative(&self) -> bool {
        self.max < 0.0
    }
}

/// Orthonormal basis (rows) of the span of the given rows.
fn span_basis(rows: &[ArrayView1<f64>]) -> Result<Array2<f64>> {
    let d = rows[0].len();
    let mut m = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).assign(r);
    }
    linalg::orthonormalize_rows(&mut m)?;
    Ok(m)
}

/// Samples the cone `{cos(w, target) = 1 − δ}` inside the span of the
/// relevant centers and reports the extremes of the signed rotation rate
/// toward `target`.
///
/// Class-average cones live in the span of that class's centers and only
/// accept points activated by every one of them. Subclass cones live in the
/// span of all centers. Points with any relevant center within
/// [`KINK_TOL`] of its activation boundary are redrawn.
pub fn alignment_bias_sweep(
    field: &ExtremalField,
    delta: f64,
    n_samples: usize,
    which: SweepTarget,
    sign: NeuronSign,
    seed: u64,
) -> Result<SweepSummary> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let pts = field.points();
    let (target, relevant, all_active): (Array1<f64>, Vec<usize>, bool) = match which {
        SweepTarget::ClassAverage => {
            let rows = field.class_rows(sign.value());
            if rows.is_empty() {
                return Err(Error::EmptyRegion(format!("no centers with label {}", sign.value())));
            }
            let mut t = Array1::zeros(field.dim());
            for &k in &rows {
                t += &pts.row(k);
            }
            (t, rows, true)
        }
        SweepTarget::Subclass(k) => {
            if k >= pts.nrows() {
                return Err(Error::InvalidParameter(format!("subclass {k} out of range")));
            }
            (pts.row(k).to_owned(), (0..pts.nrows()).collect(), false)
        }
    };
    let t_hat = &target / nonzero(target.view(), "target")?;
    let span = span_basis(&relevant.iter().map(|&k| pts.row(k)).collect::<Vec<_>>())?;
    let c = 1.0 - delta;
    let s = (1.0 - c * c).sqrt();
    let mut r = rng::stream(seed, 0xc0e);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut accepted = 0;
    let mut rejected = 0;
    let budget = n_samples.saturating_mul(MAX_DRAWS_PER_SAMPLE);
    while accepted < n_samples {
        if accepted + rejected >= budget {
            return Err(Error::EmptyRegion(format!(
                "no admissible point on the cone at delta={delta} after {budget} draws"
            )));
        }
        let coeff = linalg::gaussian_vector(span.nrows(), &mut r);
        let mut u = span.t().dot(&coeff);
        let along = u.dot(&t_hat);
        u.scaled_add(-along, &t_hat);
        let nu = linalg::norm(u.view());
        if nu < 1e-12 {
            // The span is one-dimensional along the target: no cone exists.
            return Err(Error::EmptyRegion(format!("the cone at delta={delta} has no admissible directions")));
        }
        let mut w = t_hat.clone() * c;
        w.scaled_add(s / nu, &u);
        let admissible = relevant.iter().all(|&k| {
            let xk = pts.row(k);
            let cos = xk.dot(&w) / linalg::norm(xk);
            if all_active {
                cos > KINK_TOL
            } else {
                cos.abs() >= KINK_TOL
            }
        });
        if !admissible {
            rejected += 1;
            continue;
        }
        let x = extremal_vector_gated(field, w.view(), KINK_TOL)?;
        let rate = sign.value() * projected_rate(&x, w.view(), target.view());
        min = min.min(rate);
        max = max.max(rate);
        accepted += 1;
    }
    Ok(SweepSummary { p: field.p, delta, sign, target: which, min, max, accepted, rejected })
}

/// `δ` such that `1 − δ = √(1 − ζ)`.
pub fn delta_for_zeta(zeta: f64) -> f64 {
    1.0 - (1.0 - zeta).sqrt()
}

/// Lower margin of the subclass alignment rate near a center: the smallest
/// sampled rate toward subclass `k` at `cos = √(1−ζ)` and the leading-order
/// value `p·ζ` it is compared against.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaCheck {
    pub zeta: f64,
    pub min_rate: f64,
    pub leading: f64,
}

impl LambdaCheck {
    /// The sampled minimum keeps at least half of the leading term.
    pub fn passed(&self) -> bool {
        self.min_rate >= self.leading / 2.0
    }
}

pub fn lambda_check(field: &ExtremalField, k: usize, zeta: f64, n_samples: usize, seed: u64) -> Result<LambdaCheck> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::InvalidParameter(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    let sign = if field.y.get(k) == Some(&-1.0) { NeuronSign::Negative } else { NeuronSign::Positive };
    let s = alignment_bias_sweep(field, delta_for_zeta(zeta), n_samples, SweepTarget::Subclass(k), sign, seed)?;
    Ok(LambdaCheck { zeta, min_rate: s.min, leading: field.p * zeta })
}
