//! The closed-form classifiers
//!
//! * `F(x) = √K₁ σ(⟨μ̄₊,x⟩) − √K₂ σ(⟨μ̄₋,x⟩)`
//! * `F^(p)(x) = Σ_{k<K₁} σ^p(⟨μ_k,x⟩) − Σ_{k≥K₁} σ^p(⟨μ_k,x⟩)`
//!
//! their exact realizations as pReLU networks, and a sampled estimate of
//! `inf_{c>0} sup_{‖x‖=1} |c f(x) − F(x)|`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SubclassBasis;
use crate::net::{relu_pow, relu_pow_deriv, PreluNet};
use crate::{linalg, par, rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Average-center classifier `F`.
    F,
    /// Subclass classifier `F^(p)`.
    Fp { p: f64 },
}

#[derive(Debug, Clone)]
pub struct ReferenceClassifier {
    kind: ReferenceKind,
    basis: SubclassBasis,
    mu_plus: Array1<f64>,
    mu_minus: Array1<f64>,
}

impl ReferenceClassifier {
    pub fn new(kind: ReferenceKind, basis: SubclassBasis) -> Result<Self> {
        if let ReferenceKind::Fp { p } = kind {
            if !(p >= 1.0) {
                return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
            }
        }
        let mu_plus = basis.mu_plus();
        let mu_minus = basis.mu_minus();
        Ok(Self { kind, basis, mu_plus, mu_minus })
    }

    pub fn f(basis: SubclassBasis) -> Self {
        Self::new(ReferenceKind::F, basis).expect("F has no parameters")
    }

    pub fn fp(basis: SubclassBasis, p: f64) -> Result<Self> {
        Self::new(ReferenceKind::Fp { p }, basis)
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn basis(&self) -> &SubclassBasis {
        &self.basis
    }

    pub fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.basis.dim() {
            return Err(Error::DimensionMismatch { expected: self.basis.dim(), got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: ArrayView1<f64>) -> f64 {
        let (k1, k2) = (self.basis.k1 as f64, self.basis.k2() as f64);
        match self.kind {
            ReferenceKind::F => k1.sqrt() * self.mu_plus.dot(&x).max(0.0) - k2.sqrt() * self.mu_minus.dot(&x).max(0.0),
            ReferenceKind::Fp { p } => {
                let proj = self.basis.mu.dot(&x);
                proj.iter()
                    .enumerate()
                    .map(|(k, &a)| {
                        let s = relu_pow(a, p);
                        if self.basis.is_positive(k) {
                            s
                        } else {
                            -s
                        }
                    })
                    .sum()
            }
        }
    }

    /// Values on every row of `x`.
    pub fn eval_batch(&self, x: ndarray::ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.basis.dim() {
            return Err(Error::DimensionMismatch { expected: self.basis.dim(), got: x.ncols() });
        }
        Ok(x.rows().into_iter().map(|r| self.eval_unchecked(r)).collect())
    }

    /// Gradient in `x`, taking `γ(a) = 1_{a>0}` at the kinks.
    pub fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let (k1, k2) = (self.basis.k1 as f64, self.basis.k2() as f64);
        match self.kind {
            ReferenceKind::F => {
                let mut g = Array1::zeros(x.len());
                if self.mu_plus.dot(&x) > 0.0 {
                    g.scaled_add(k1.sqrt(), &self.mu_plus);
                }
                if self.mu_minus.dot(&x) > 0.0 {
                    g.scaled_add(-k2.sqrt(), &self.mu_minus);
                }
                g
            }
            ReferenceKind::Fp { p } => {
                let proj = self.basis.mu.dot(&x);
                let mut g = Array1::zeros(x.len());
                for (k, &a) in proj.iter().enumerate() {
                    let d = relu_pow_deriv(a, p);
                    if d != 0.0 {
                        let s = if self.basis.is_positive(k) { d } else { -d };
                        g.scaled_add(s, &self.basis.center(k));
                    }
                }
                g
            }
        }
    }
}

pub fn eval_f(basis: &SubclassBasis, x: ArrayView1<f64>) -> Result<f64> {
    ReferenceClassifier::f(basis.clone()).eval(x)
}

pub fn eval_fp(basis: &SubclassBasis, p: f64, x: ArrayView1<f64>) -> Result<f64> {
    ReferenceClassifier::fp(basis.clone(), p)?.eval(x)
}

/// Which neurons realize which piece of a reference classifier.
///
/// For `F`, `partition = [I₊, I₋]`; for `F^(p)`, `partition = [I_1, …, I_K]`.
/// Neurons in no set are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationPlan {
    pub partition: Vec<Vec<usize>>,
    pub lambda: Array1<f64>,
}

impl RealizationPlan {
    /// Round-robin assignment with equal weights inside each set.
    pub fn even(kind: ReferenceKind, h: usize, basis: &SubclassBasis) -> Result<Self> {
        let sets = Self::set_count(kind, basis);
        if h < sets {
            return Err(Error::Construction(format!("need h >= {sets} neurons, got {h}")));
        }
        let mut partition = vec![Vec::new(); sets];
        for j in 0..h {
            partition[j % sets].push(j);
        }
        let mut lambda = Array1::zeros(h);
        for (s, set) in partition.iter().enumerate() {
            let total = Self::target(kind, basis, s);
            for &j in set {
                lambda[j] = (total / set.len() as f64).sqrt();
            }
        }
        Ok(Self { partition, lambda })
    }

    /// Random nonempty disjoint sets (some neurons possibly unused) with
    /// random positive weights, normalized as required.
    pub fn random<R: Rng + ?Sized>(kind: ReferenceKind, h: usize, basis: &SubclassBasis, rng: &mut R) -> Result<Self> {
        let sets = Self::set_count(kind, basis);
        if h < sets {
            return Err(Error::Construction(format!("need h >= {sets} neurons, got {h}")));
        }
        let mut perm: Vec<usize> = (0..h).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], rng);
        let mut partition: Vec<Vec<usize>> = perm[..sets].iter().map(|&j| vec![j]).collect();
        for &j in &perm[sets..] {
            let s = rng.random_range(0..=sets);
            if s < sets {
                partition[s].push(j);
            }
        }
        let mut lambda = Array1::zeros(h);
        for (s, set) in partition.iter().enumerate() {
            let raw: Vec<f64> = set.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let sq: f64 = raw.iter().map(|x| x * x).sum();
            let scale = (Self::target(kind, basis, s) / sq).sqrt();
            for (&j, r) in set.iter().zip(raw) {
                lambda[j] = r * scale;
            }
        }
        Ok(Self { partition, lambda })
    }

    fn set_count(kind: ReferenceKind, basis: &SubclassBasis) -> usize {
        match kind {
            ReferenceKind::F => 2,
            ReferenceKind::Fp { .. } => basis.k(),
        }
    }

    /// Required `Σ_{j∈I_s} λ_j²`.
    fn target(kind: ReferenceKind, basis: &SubclassBasis, s: usize) -> f64 {
        match kind {
            ReferenceKind::F if s == 0 => (basis.k1 as f64).sqrt(),
            ReferenceKind::F => (basis.k2() as f64).sqrt(),
            ReferenceKind::Fp { .. } => 1.0,
        }
    }

    pub fn validate(&self, kind: ReferenceKind, h: usize, basis: &SubclassBasis) -> Result<()> {
        let sets = Self::set_count(kind, basis);
        if self.partition.len() != sets {
            return Err(Error::Construction(format!("expected {sets} index sets, got {}", self.partition.len())));
        }
        if self.lambda.len() != h {
            return Err(Error::Construction(format!("lambda has length {}, h = {h}", self.lambda.len())));
        }
        if self.lambda.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::Construction("lambda must be nonnegative".into()));
        }
        let mut seen = vec![false; h];
        for (s, set) in self.partition.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Construction(format!("index set {s} is empty")));
            }
            for &j in set {
                if j >= h || seen[j] {
                    return Err(Error::Construction(format!("neuron {j} out of range or reused")));
                }
                seen[j] = true;
            }
            let sum: f64 = set.iter().map(|&j| self.lambda[j] * self.lambda[j]).sum();
            let want = Self::target(kind, basis, s);
            if (sum - want).abs() > 1e-12 {
                return Err(Error::Construction(format!("set {s}: sum of squared lambda is {sum}, expected {want}")));
            }
        }
        Ok(())
    }
}

/// Builds the network that coincides with the reference classifier
/// everywhere. `F` needs `p = 1`; `F^(p)` uses the exponent of `kind`.
pub fn realize(kind: ReferenceKind, h: usize, plan: &RealizationPlan, basis: &SubclassBasis) -> Result<PreluNet> {
    plan.validate(kind, h, basis)?;
    let d = basis.dim();
    let mut w = Array2::zeros((h, d));
    let mut v = Array1::zeros(h);
    let p = match kind {
        ReferenceKind::F => {
            let (mp, mm) = (basis.mu_plus(), basis.mu_minus());
            for (s, set) in plan.partition.iter().enumerate() {
                let (dir, sign) = if s == 0 { (&mp, 1.0) } else { (&mm, -1.0) };
                for &j in set {
                    w.row_mut(j).assign(&(dir * plan.lambda[j]));
                    v[j] = sign * plan.lambda[j];
                }
            }
            1.0
        }
        ReferenceKind::Fp { p } => {
            for (k, set) in plan.partition.iter().enumerate() {
                let sign = basis.label(k);
                for &j in set {
                    w.row_mut(j).assign(&(&basis.center(k) * plan.lambda[j]));
                    v[j] = sign * plan.lambda[j];
                }
            }
            p
        }
    };
    PreluNet::binary(w, v, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistConfig {
    pub n1: usize,
    pub n2: usize,
    pub step: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for DistConfig {
    fn default() -> Self {
        Self { n1: 4096, n2: 256, step: 0.05, max_iter: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistReport {
    pub dist: f64,
    pub c_hat: f64,
    /// The least-squares scale was not positive and was clamped.
    pub clamped: bool,
}

pub const C_FLOOR: f64 = 1e-12;

/// Stage-1 sample: `n` uniform points on the unit sphere, stream 0 of `seed`.
fn sphere_samples(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, 0);
    let mut x = Array2::zeros((n, d));
    for mut row in x.rows_mut() {
        row.assign(&linalg::unit_sphere(d, &mut r));
    }
    x
}

/// Least-squares scale `ĉ = Σ f·F / Σ f²` over `N1` uniform sphere samples.
pub fn fit_scale(net: &PreluNet, reference: &ReferenceClassifier, n1: usize, seed: u64) -> Result<(f64, bool)> {
    let x = sphere_samples(n1, net.dim(), seed);
    let f = net.forward_batch(x.view())?.column(0).to_owned();
    let fr = reference.eval_batch(x.view())?;
    let ff = f.dot(&f);
    if ff == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let c = f.dot(&fr) / ff;
    Ok(if c > 0.0 { (c, false) } else { (C_FLOOR, true) })
}

/// Stage-1 least-squares objective at scale `c` (for optimality checks).
pub fn fit_objective(net: &PreluNet, reference: &ReferenceClassifier, n1: usize, seed: u64, c: f64) -> Result<f64> {
    let x = sphere_samples(n1, net.dim(), seed);
    let f = net.forward_batch(x.view())?.column(0).to_owned();
    let fr = reference.eval_batch(x.view())?;
    Ok((f * c - fr).mapv(|e| e * e).sum())
}

/// Runs one normalized gradient-ascent chain on `|ĉf − F|²` over the sphere
/// and returns the final gap `|ĉf − F|`.
pub fn ascent_chain(
    net: &PreluNet,
    reference: &ReferenceClassifier,
    c: f64,
    mut x: Array1<f64>,
    step: f64,
    max_iter: usize,
) -> f64 {
    let one = Array1::from_elem(1, 1.0);
    let gap = |x: ArrayView1<f64>| c * net.forward_multi(x).expect("dim")[0] - reference.eval_unchecked(x);
    for _ in 0..max_iter {
        let e = gap(x.view());
        let g = (net.input_gradient(x.view(), one.view()).expect("dim") * c - reference.gradient(x.view())) * (2.0 * e);
        let n = linalg::norm(g.view());
        if n == 0.0 || !n.is_finite() {
            break;
        }
        x.scaled_add(step / n, &g);
        let nx = linalg::norm(x.view());
        x /= nx;
    }
    gap(x.view()).abs()
}

/// Sampled estimate of `dist(f, F)`.
pub fn dist_estimate(net: &PreluNet, reference: &ReferenceClassifier, cfg: &DistConfig) -> Result<DistReport> {
    if cfg.n1 == 0 || cfg.n2 == 0 {
        return Err(Error::InvalidParameter("N1 and N2 must be >= 1".into()));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::InvalidParameter("step must be > 0".into()));
    }
    if net.outputs() != 1 {
        return Err(Error::InvalidParameter("distance needs a binary network".into()));
    }
    if net.dim() != reference.basis().dim() {
        return Err(Error::DimensionMismatch { expected: reference.basis().dim(), got: net.dim() });
    }
    let (c_hat, clamped) = fit_scale(net, reference, cfg.n1, cfg.seed)?;
    let d = net.dim();
    let gaps = par::map_indexed(cfg.n2, |i| {
        let start = linalg::unit_sphere(d, &mut rng::stream(cfg.seed, 1 + i as u64));
        ascent_chain(net, reference, c_hat, start, cfg.step, cfg.max_iter)
    });
    let dist = gaps.into_iter().fold(0.0, f64::max);
    Ok(DistReport { dist, c_hat, clamped })
}
