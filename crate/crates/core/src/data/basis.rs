use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{linalg, rng, Error, Result};

/// Parameters of the subclass mixture: `K` orthonormal centers in `ℝ^D`, the
/// first `K1` of which form the positive class, with isotropic noise of total
/// scale `alpha` (per-coordinate variance `alpha²/D`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub d: usize,
    pub k: usize,
    pub k1: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl ClusterSpec {
    pub fn new(d: usize, k: usize, k1: usize, alpha: f64, seed: u64) -> Result<Self> {
        let spec = Self { d, k, k1, alpha, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k > self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: self.k });
        }
        if self.k1 < 1 || self.k1 >= self.k {
            return Err(Error::InvalidParameter(format!("need 1 <= K1 < K, got K1={} K={}", self.k1, self.k)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn k2(&self) -> usize {
        self.k - self.k1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BasisMode {
    Canonical,
    #[default]
    RandomOrthogonal,
}

/// Orthonormal subclass centers, one per row. Subclass indices are 0-based:
/// centers `0..k1` are positive, `k1..k` negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubclassBasis {
    pub mu: Array2<f64>,
    pub k1: usize,
}

impl SubclassBasis {
    pub fn new(mu: Array2<f64>, k1: usize) -> Result<Self> {
        let k = mu.nrows();
        if k1 < 1 || k1 >= k {
            return Err(Error::InvalidParameter(format!("need 1 <= K1 < K, got K1={k1} K={k}")));
        }
        let gram = mu.dot(&mu.t());
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - want).abs() > 1e-10 {
                    return Err(Error::Domain(format!(
                        "centers are not orthonormal: <mu_{i}, mu_{j}> = {}",
                        gram[[i, j]]
                    )));
                }
            }
        }
        Ok(Self { mu, k1 })
    }

    pub fn k(&self) -> usize {
        self.mu.nrows()
    }

    pub fn k2(&self) -> usize {
        self.k() - self.k1
    }

    pub fn dim(&self) -> usize {
        self.mu.ncols()
    }

    pub fn center(&self, k: usize) -> ArrayView1<'_, f64> {
        self.mu.row(k)
    }

    pub fn is_positive(&self, k: usize) -> bool {
        k < self.k1
    }

    pub fn label(&self, k: usize) -> f64 {
        if self.is_positive(k) {
            1.0
        } else {
            -1.0
        }
    }

    /// Indices of the centers in the class opposite to subclass `k`.
    pub fn opposite(&self, k: usize) -> std::ops::Range<usize> {
        if self.is_positive(k) {
            self.k1..self.k()
        } else {
            0..self.k1
        }
    }

    /// `μ̄₊`: normalized sum of the positive centers.
    pub fn mu_plus(&self) -> Array1<f64> {
        let mut s = Array1::zeros(self.dim());
        for k in 0..self.k1 {
            s += &self.center(k);
        }
        s / (self.k1 as f64).sqrt()
    }

    /// `μ̄₋`: normalized sum of the negative centers.
    pub fn mu_minus(&self) -> Array1<f64> {
        let mut s = Array1::zeros(self.dim());
        for k in self.k1..self.k() {
            s += &self.center(k);
        }
        s / (self.k2() as f64).sqrt()
    }
}

pub fn make_basis(spec: &ClusterSpec, mode: BasisMode) -> Result<SubclassBasis> {
    spec.validate()?;
    let mu = match mode {
        BasisMode::Canonical => Array2::from_shape_fn((spec.k, spec.d), |(i, j)| if i == j { 1.0 } else { 0.0 }),
        BasisMode::RandomOrthogonal => {
            let mut r = rng::stream(spec.seed, 0xba515);
            let mut m = linalg::gaussian_matrix(spec.k, spec.d, &mut r);
            linalg::orthonormalize_rows(&mut m)?;
            m
        }
    };
    SubclassBasis::new(mu, spec.k1)
}

/// `(μ̄₊, μ̄₋)`.
pub fn average_centers(basis: &SubclassBasis) -> (Array1<f64>, Array1<f64>) {
    (basis.mu_plus(), basis.mu_minus())
}
