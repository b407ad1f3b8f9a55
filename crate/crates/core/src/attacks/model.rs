use ndarray::{Array1, ArrayView1};

use crate::net::PreluNet;
use crate::reference::ReferenceClassifier;

/// A classifier that exposes its outputs and input gradients. Binary models
/// have one output whose sign is the prediction.
pub trait Model: Sync {
    fn dim(&self) -> usize;
    fn outputs(&self) -> usize;
    fn value(&self, x: ArrayView1<f64>) -> Array1<f64>;
    /// `∇_x Σ_c g_c f_c(x)`.
    fn input_gradient(&self, x: ArrayView1<f64>, g: ArrayView1<f64>) -> Array1<f64>;
}

impl Model for PreluNet {
    fn dim(&self) -> usize {
        PreluNet::dim(self)
    }

    fn outputs(&self) -> usize {
        PreluNet::outputs(self)
    }

    fn value(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.forward_multi(x).expect("dimension checked by caller")
    }

    fn input_gradient(&self, x: ArrayView1<f64>, g: ArrayView1<f64>) -> Array1<f64> {
        PreluNet::input_gradient(self, x, g).expect("dimension checked by caller")
    }
}

impl Model for ReferenceClassifier {
    fn dim(&self) -> usize {
        self.basis().dim()
    }

    fn outputs(&self) -> usize {
        1
    }

    fn value(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_elem(1, self.eval_unchecked(x))
    }

    fn input_gradient(&self, x: ArrayView1<f64>, g: ArrayView1<f64>) -> Array1<f64> {
        self.gradient(x) * g[0]
    }
}
