use ndarray::{Array1, ArrayView1};

use super::Model;

/// A model evaluated on `(u − m)/‖u − m‖`, so attacks act on raw inputs
/// (pixels) while the network sees centered, normalized data.
pub struct Normalized<'a, M: Model + ?Sized> {
    pub inner: &'a M,
    pub mean: Array1<f64>,
}

impl<M: Model + ?Sized> Normalized<'_, M> {
    fn map(&self, u: ArrayView1<f64>) -> (Array1<f64>, f64) {
        let r = &u - &self.mean;
        let n = r.dot(&r).sqrt();
        if n == 0.0 {
            (r, 0.0)
        } else {
            (r / n, n)
        }
    }
}

impl<M: Model + ?Sized> Model for Normalized<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn outputs(&self) -> usize {
        self.inner.outputs()
    }

    fn value(&self, u: ArrayView1<f64>) -> Array1<f64> {
        self.inner.value(self.map(u).0.view())
    }

    fn input_gradient(&self, u: ArrayView1<f64>, g: ArrayView1<f64>) -> Array1<f64> {
        let (x, n) = self.map(u);
        if n == 0.0 {
            return Array1::zeros(u.len());
        }
        // Jacobian of x = r/‖r‖ is (I − x xᵀ)/‖r‖.
        let gx = self.inner.input_gradient(x.view(), g);
        let radial = gx.dot(&x);
        (gx - x * radial) / n
    }
}
