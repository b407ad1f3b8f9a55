//! `g_p(q; z) = (Σ z_i^q)(Σ z_i^{p+1−q})`, convex in `q` with its minimum at
//! `(p+1)/2`.

use crate::{Error, Result};

fn check(z: &[f64]) -> Result<()> {
    if z.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain("g_p needs finite nonnegative entries".into()));
    }
    if z.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("g_p is undefined for an all-zero vector".into()));
    }
    Ok(())
}

/// `z^q` with `0^0 = 1`.
fn pow0(z: f64, q: f64) -> Result<f64> {
    if z > 0.0 {
        Ok(z.powf(q))
    } else if q == 0.0 {
        Ok(1.0)
    } else if q > 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!("0^{q} is infinite")))
    }
}

fn power_sum(z: &[f64], q: f64) -> Result<f64> {
    z.iter().map(|&v| pow0(v, q)).sum()
}

pub fn gp(q: f64, z: &[f64], p: f64) -> Result<f64> {
    check(z)?;
    Ok(power_sum(z, q)? * power_sum(z, p + 1.0 - q)?)
}

/// `Σ_{i,j} z_i^q z_j^{p+1−q} (log z_i − log z_j)²` over the strictly positive
/// entries.
pub fn gp_second_derivative(q: f64, z: &[f64], p: f64) -> Result<f64> {
    check(z)?;
    let pos: Vec<(f64, f64)> = z.iter().filter(|&&v| v > 0.0).map(|&v| (v, v.ln())).collect();
    let r = p + 1.0 - q;
    let mut s = 0.0;
    for &(zi, li) in &pos {
        let a = zi.powf(q);
        for &(zj, lj) in &pos {
            let d = li - lj;
            s += a * zj.powf(r) * d * d;
        }
    }
    Ok(s)
}

/// `(p+1)/2`.
pub fn gp_argmin(p: f64) -> f64 {
    (p + 1.0) / 2.0
}
