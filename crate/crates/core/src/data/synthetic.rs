use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ClusterSpec, Dataset, Provenance, SubclassBasis, Targets};
use crate::{Error, Result};

/// Draws `n` samples: `z ~ Unif[K]`, `x = μ_z + ε` with `ε ~ N(0, α²/D · I)`,
/// `y = +1` iff `z < K1`.
pub fn sample_synthetic<R: Rng + ?Sized>(
    spec: &ClusterSpec,
    basis: &SubclassBasis,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if basis.k() != spec.k || basis.dim() != spec.d || basis.k1 != spec.k1 {
        return Err(Error::InvalidParameter("basis does not match cluster spec".into()));
    }
    let sd = spec.alpha / (spec.d as f64).sqrt();
    let mut x = Array2::zeros((n, spec.d));
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let k = rng.random_range(0..spec.k);
        row.assign(&basis.center(k));
        if sd > 0.0 {
            for v in row.iter_mut() {
                *v += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        debug_assert_eq!(i, z.len());
        z.push(k);
        y.push(basis.label(k));
    }
    Dataset::new(x, Targets::Binary { y, z: Some(z) }, Provenance::Synthetic)
}

/// The `K` exact centers with their class labels.
pub fn simplified_dataset(basis: &SubclassBasis) -> Dataset {
    let k = basis.k();
    let y = (0..k).map(|i| basis.label(i)).collect();
    Dataset {
        x: basis.mu.clone(),
        targets: Targets::Binary { y, z: Some((0..k).collect()) },
        provenance: Provenance::Simplified,
    }
}
