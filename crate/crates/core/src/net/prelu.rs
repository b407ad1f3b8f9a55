use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::{linalg, Error, Result};

/// `f_p(x) = Σ_j v_j σ(⟨x,w_j⟩)^p / ‖w_j‖^{p-1}`.
///
/// `v` is `h × C`; binary networks have `C = 1`. Rows of `w` with zero norm
/// contribute nothing and receive zero gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreluNet {
    pub w: Array2<f64>,
    pub v: Array2<f64>,
    pub p: f64,
}

/// Gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: Array2<f64>,
    pub v: Array2<f64>,
}

/// `σ(a)^p`, exact for integer `p`.
#[inline]
pub fn relu_pow(a: f64, p: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else if p == p.trunc() && p <= 16.0 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// `p σ(a)^{p-1} γ(a)` with `γ(a) = 1_{a>0}`.
#[inline]
pub fn relu_pow_deriv(a: f64, p: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else if p == 1.0 {
        1.0
    } else {
        p * relu_pow(a, p - 1.0)
    }
}

#[inline]
fn pow_norm(r: f64, e: f64) -> f64 {
    if e == e.trunc() && e.abs() <= 16.0 {
        r.powi(e as i32)
    } else {
        r.powf(e)
    }
}

impl PreluNet {
    pub fn new(w: Array2<f64>, v: Array2<f64>, p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        if v.nrows() != w.nrows() {
            return Err(Error::DimensionMismatch { expected: w.nrows(), got: v.nrows() });
        }
        if v.ncols() == 0 {
            return Err(Error::InvalidParameter("need at least one output".into()));
        }
        Ok(Self { w, v, p })
    }

    /// Binary network from a vector of outer weights.
    pub fn binary(w: Array2<f64>, v: Array1<f64>, p: f64) -> Result<Self> {
        let h = v.len();
        Self::new(w, v.into_shape_with_order((h, 1)).expect("contiguous"), p)
    }

    pub fn zeros(h: usize, d: usize, outputs: usize, p: f64) -> Result<Self> {
        Self::new(Array2::zeros((h, d)), Array2::zeros((h, outputs)), p)
    }

    pub fn width(&self) -> usize {
        self.w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.v.ncols()
    }

    pub fn row_norms(&self) -> Array1<f64> {
        self.w.rows().into_iter().map(|r| linalg::norm(r)).collect()
    }

    /// `|v_j|·‖w_j‖` (ℓ2 norm of the outer-weight row in multiclass mode).
    pub fn contributions(&self) -> Array1<f64> {
        self.w.rows().into_iter().zip(self.v.rows()).map(|(w, v)| linalg::norm(w) * linalg::norm(v)).collect()
    }

    /// `max_j |‖v_j‖² − ‖w_j‖²|`.
    pub fn balancedness_drift(&self) -> f64 {
        self.w.rows().into_iter().zip(self.v.rows()).map(|(w, v)| (v.dot(&v) - w.dot(&w)).abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        Self { w: &self.w * gamma, v: &self.v * gamma, p: self.p }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: d });
        }
        Ok(())
    }

    /// Scalar output of a binary network.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<f64> {
        if self.outputs() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.outputs() });
        }
        Ok(self.forward_multi(x)?[0])
    }

    /// All `C` outputs at `x`.
    pub fn forward_multi(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x.len())?;
        let pre = self.w.dot(&x);
        let mut out = Array1::zeros(self.outputs());
        for (j, (&a, w)) in pre.iter().zip(self.w.rows()).enumerate() {
            let s = relu_pow(a, self.p);
            if s == 0.0 {
                continue;
            }
            let r = linalg::norm(w);
            if r == 0.0 {
                continue;
            }
            out.scaled_add(s / pow_norm(r, self.p - 1.0), &self.v.row(j));
        }
        Ok(out)
    }

    /// Outputs for every row of `x` (`n × C`).
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.features(x)?.dot(&self.v))
    }

    /// Hidden post-activations `σ(⟨x_i,w_j⟩)^p / ‖w_j‖^{p-1}` (`n × h`).
    pub fn features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x.ncols())?;
        let scale = self.inv_norm_pow();
        let mut act = x.dot(&self.w.t());
        let p = self.p;
        for mut row in act.rows_mut() {
            Zip::from(&mut row).and(&scale).for_each(|a, &s| *a = relu_pow(*a, p) * s);
        }
        Ok(act)
    }

    /// `1/‖w_j‖^{p-1}` with zero rows mapped to 0.
    fn inv_norm_pow(&self) -> Array1<f64> {
        self.row_norms().mapv(|r| if r == 0.0 { 0.0 } else { 1.0 / pow_norm(r, self.p - 1.0) })
    }

    /// Parameter gradient of `Σ_i Σ_c G_ic · f_c(x_i)`, where `upstream = G`
    /// (`n × C`) holds the loss derivative with respect to each output.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<Gradient> {
        self.check_dim(x.ncols())?;
        if upstream.nrows() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: upstream.nrows() });
        }
        if upstream.ncols() != self.outputs() {
            return Err(Error::DimensionMismatch { expected: self.outputs(), got: upstream.ncols() });
        }
        let p = self.p;
        let norms = self.row_norms();
        let pre = x.dot(&self.w.t());
        // dL/d(act_ij)
        let s = upstream.dot(&self.v.t());
        let mut act = pre.clone();
        let mut b = pre;
        Zip::from(&mut act).and(&mut b).and(&s).for_each(|act, b, &sij| {
            let a = *act;
            *act = relu_pow(a, p);
            *b = sij * relu_pow_deriv(a, p);
        });
        let mut radial = Array1::zeros(norms.len());
        for (j, &r) in norms.iter().enumerate() {
            if r == 0.0 {
                act.column_mut(j).fill(0.0);
                b.column_mut(j).fill(0.0);
                continue;
            }
            let inv = 1.0 / pow_norm(r, p - 1.0);
            act.column_mut(j).mapv_inplace(|a| a * inv);
            b.column_mut(j).mapv_inplace(|a| a * inv);
            if p != 1.0 {
                let sa: f64 = s.column(j).dot(&act.column(j));
                radial[j] = (p - 1.0) * sa / (r * r);
            }
        }
        let gv = act.t().dot(&upstream);
        let mut gw = b.t().dot(&x);
        if p != 1.0 {
            Zip::from(gw.rows_mut()).and(self.w.rows()).and(&radial).for_each(|mut g, w, &c| g.scaled_add(-c, &w));
        }
        Ok(Gradient { w: gw, v: gv })
    }

    /// `∇_x Σ_c g_c f_c(x)`.
    pub fn input_gradient(&self, x: ArrayView1<f64>, g: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x.len())?;
        let pre = self.w.dot(&x);
        let mut out = Array1::zeros(self.dim());
        for (j, (&a, w)) in pre.iter().zip(self.w.rows()).enumerate() {
            let d = relu_pow_deriv(a, self.p);
            if d == 0.0 {
                continue;
            }
            let r = linalg::norm(w);
            if r == 0.0 {
                continue;
            }
            let coef = g.dot(&self.v.row(j)) * d / pow_norm(r, self.p - 1.0);
            out.scaled_add(coef, &w);
        }
        Ok(out)
    }
}

/// Hidden features of a dataset matrix, one row per sample.
pub fn hidden_features(net: &PreluNet, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    net.features(x)
}

/// `‖A‖_F² / ‖A‖²`.
pub fn stable_rank(a: ArrayView2<f64>) -> Result<f64> {
    linalg::stable_rank(a)
}
