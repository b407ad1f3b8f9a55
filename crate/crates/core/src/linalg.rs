//! Small dense helpers on top of ndarray: sphere sampling, orthonormalization
//! and the spectral quantities used for feature diagnostics.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub fn norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0)
}

pub fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform point on the unit sphere in `dim` dimensions (normalized Gaussian).
pub fn unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let g = gaussian_vector(dim, rng);
        let n = norm(g.view());
        if n > 1e-300 {
            return g / n;
        }
    }
}

/// Orthonormalizes the rows of `m` in place with two passes of modified
/// Gram-Schmidt. Fails if the rows are numerically dependent.
pub fn orthonormalize_rows(m: &mut Array2<f64>) -> Result<()> {
    let rows = m.nrows();
    for _pass in 0..2 {
        for i in 0..rows {
            for j in 0..i {
                let (done, mut rest) = m.view_mut().split_at(ndarray::Axis(0), i);
                let prev = done.row(j);
                let mut cur = rest.row_mut(0);
                let c = cur.dot(&prev);
                cur.scaled_add(-c, &prev);
            }
            let mut row = m.row_mut(i);
            let n = row.dot(&row).sqrt();
            if n < 1e-12 {
                return Err(Error::Domain("rows are linearly dependent".into()));
            }
            row /= n;
        }
    }
    Ok(())
}

/// Largest singular value of `a` by power iteration on `AᵀA`, stopping when
/// the relative change of the estimate falls below `tol`.
pub fn spectral_norm(a: ArrayView2<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let cols = a.ncols();
    if cols == 0 || a.nrows() == 0 || a.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    // Fixed start vector: deterministic, and generic enough not to be
    // orthogonal to the top right-singular vector.
    let mut rng = crate::rng::from_seed(0x5eed_5eed);
    let mut v = unit_sphere(cols, &mut rng);
    let mut sigma2 = 0.0_f64;
    for _ in 0..max_iter {
        let av = a.dot(&v);
        let mut w = a.t().dot(&av);
        let next = av.dot(&av);
        let nw = norm(w.view());
        if nw == 0.0 {
            // v happened to lie in the null space; restart from another draw.
            v = unit_sphere(cols, &mut rng);
            continue;
        }
        w /= nw;
        v = w;
        if sigma2 > 0.0 && ((next - sigma2).abs() / next) < tol {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    // Rayleigh quotient at the final vector.
    let av = a.dot(&v);
    Ok(av.dot(&av).max(sigma2).sqrt())
}

/// Stable rank `‖A‖_F² / ‖A‖²`.
pub fn stable_rank(a: ArrayView2<f64>) -> Result<f64> {
    let frob2: f64 = a.iter().map(|v| v * v).sum();
    if frob2 == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let s = spectral_norm(a, 1e-8, 100_000)?;
    Ok(frob2 / (s * s))
}
