//! Closed-form attack directions on the subclass model.

use ndarray::{Array1, ArrayView1};

use crate::data::SubclassBasis;

/// `d₀ = (√K₁ μ̄₊ − √K₂ μ̄₋)/√K`, a unit vector.
pub fn d0_direction(basis: &SubclassBasis) -> Array1<f64> {
    let (k1, k2, k) = (basis.k1 as f64, basis.k2() as f64, basis.k() as f64);
    (basis.mu_plus() * k1.sqrt() - basis.mu_minus() * k2.sqrt()) / k.sqrt()
}

/// `x − y·((1+ρ)/√K)·d₀`.
pub fn d0_attack(basis: &SubclassBasis, x: ArrayView1<f64>, y: f64, rho: f64) -> Array1<f64> {
    let scale = (1.0 + rho) / (basis.k() as f64).sqrt();
    d0_attack_at(basis, x, y, scale)
}

/// `x − y·r·d₀`: the same direction at an arbitrary radius `r`.
pub fn d0_attack_at(basis: &SubclassBasis, x: ArrayView1<f64>, y: f64, r: f64) -> Array1<f64> {
    let mut out = x.to_owned();
    out.scaled_add(-y * r, &d0_direction(basis));
    out
}

/// The opposite-class center used by default: `μ_K` (last) for positive
/// subclasses and `μ_1` (first) for negative ones.
pub fn default_opposite(basis: &SubclassBasis, z: usize) -> usize {
    if basis.is_positive(z) {
        basis.k() - 1
    } else {
        0
    }
}

/// `x + scale·(μ_target − μ_z)/√2`.
pub fn subclass_swap_attack(
    basis: &SubclassBasis,
    x: ArrayView1<f64>,
    z: usize,
    target: usize,
    scale: f64,
) -> Array1<f64> {
    let d = (&basis.center(target) - &basis.center(z)) / 2f64.sqrt();
    let mut out = x.to_owned();
    out.scaled_add(scale, &d);
    out
}
