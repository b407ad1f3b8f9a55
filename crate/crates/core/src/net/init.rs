use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::PreluNet;
use crate::{linalg, rng, Error, Result};

/// Law of the unscaled directions `w_{j0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionLaw {
    /// Entries uniform on `(-1/√D, 1/√D)`, so `‖w_{j0}‖ ≤ 1` surely.
    Uniform,
    /// Standard normal entries: `w_j(0)` has per-entry standard deviation `ε`.
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub epsilon: f64,
    #[serde(default)]
    pub law: DirectionLaw,
    /// `v_j(0) = ±‖w_j(0)‖` when set; otherwise `v_j(0)` is drawn from the
    /// same law as a single entry of `w_j(0)`.
    #[serde(default = "yes")]
    pub balanced: bool,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl InitSpec {
    pub fn new(epsilon: f64, law: DirectionLaw, seed: u64) -> Result<Self> {
        let spec = Self { epsilon, law, balanced: true, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Almost-sure bound `M` on `‖w_{j0}‖`, if the law has one.
    pub fn norm_bound(&self) -> Option<f64> {
        match self.law {
            DirectionLaw::Uniform => Some(1.0),
            DirectionLaw::Gaussian => None,
        }
    }
}

fn entry<R: Rng + ?Sized>(law: DirectionLaw, d: usize, rng: &mut R) -> f64 {
    match law {
        DirectionLaw::Uniform => {
            let b = 1.0 / (d as f64).sqrt();
            Uniform::new(-b, b).expect("b > 0").sample(rng)
        }
        DirectionLaw::Gaussian => rng.sample(StandardNormal),
    }
}

/// `w_j(0) = ε w_{j0}`, `v_j(0) = ±‖w_j(0)‖` with fair independent signs.
///
/// With `outputs > 1` each output column gets its own sign and the row of
/// `v` is scaled so that `‖v_j‖ = ‖w_j‖`.
pub fn init_balanced(h: usize, d: usize, outputs: usize, p: f64, spec: &InitSpec) -> Result<PreluNet> {
    spec.validate()?;
    if h == 0 || d == 0 || outputs == 0 {
        return Err(Error::InvalidParameter("h, D and outputs must be >= 1".into()));
    }
    let mut r = rng::stream(spec.seed, 0x1417);
    let mut w = Array2::zeros((h, d));
    w.mapv_inplace(|_: f64| spec.epsilon * entry(spec.law, d, &mut r));
    let mut v = Array2::zeros((h, outputs));
    let col_scale = 1.0 / (outputs as f64).sqrt();
    for (j, mut row) in v.rows_mut().into_iter().enumerate() {
        let nw = linalg::norm(w.row(j));
        for x in row.iter_mut() {
            *x = if spec.balanced {
                let s = if r.random::<bool>() { 1.0 } else { -1.0 };
                s * nw * col_scale
            } else {
                spec.epsilon * entry(spec.law, d, &mut r)
            };
        }
    }
    PreluNet::new(w, v, p)
}

/// Per-entry Gaussian with standard deviation `√(2/D)` for `W` and `√(2/h)`
/// for `v`.
pub fn init_kaiming(h: usize, d: usize, outputs: usize, p: f64, seed: u64) -> Result<PreluNet> {
    if h == 0 || d == 0 || outputs == 0 {
        return Err(Error::InvalidParameter("h, D and outputs must be >= 1".into()));
    }
    let mut r = rng::stream(seed, 0x4a1);
    let sw = (2.0 / d as f64).sqrt();
    let sv = (2.0 / h as f64).sqrt();
    let w = linalg::gaussian_matrix(h, d, &mut r) * sw;
    let v = linalg::gaussian_matrix(h, outputs, &mut r) * sv;
    PreluNet::new(w, v, p)
}
