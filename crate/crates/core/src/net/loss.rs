use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Exponential,
    Logistic,
    /// Softmax cross-entropy. On a single output with `±1` labels this is the
    /// logistic loss.
    CrossEntropy,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-z})` without overflow.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary loss `ℓ(y, ŷ)` for `y ∈ {−1, +1}`.
pub fn loss_value(y: f64, yhat: f64, kind: LossKind) -> f64 {
    match kind {
        LossKind::Exponential => (-y * yhat).exp(),
        LossKind::Logistic | LossKind::CrossEntropy => softplus(-y * yhat),
    }
}

/// `∂ℓ/∂ŷ`.
pub fn loss_derivative(y: f64, yhat: f64, kind: LossKind) -> f64 {
    match kind {
        LossKind::Exponential => -y * (-y * yhat).exp(),
        LossKind::Logistic | LossKind::CrossEntropy => -y * sigmoid(-y * yhat),
    }
}

/// Softmax cross-entropy of `logits` against class `label`, with the gradient
/// `softmax(logits) − e_label`.
pub fn softmax_cross_entropy(logits: ArrayView1<f64>, label: usize) -> (f64, Array1<f64>) {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut probs = logits.mapv(|z| (z - m).exp());
    let sum = probs.sum();
    probs /= sum;
    let value = sum.ln() + m - logits[label];
    probs[label] -= 1.0;
    (value, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exponential_at_zero() {
        assert_eq!(loss_value(1.0, 0.0, LossKind::Exponential), 1.0);
        assert_eq!(loss_derivative(1.0, 0.0, LossKind::Exponential), -1.0);
    }

    #[test]
    fn logistic_is_stable_far_out() {
        let v = loss_value(1.0, 50.0, LossKind::Logistic);
        assert!(v > 0.0 && v < 1e-20);
        assert!(loss_value(-1.0, 800.0, LossKind::Logistic).is_finite());
        assert!((loss_value(-1.0, 800.0, LossKind::Logistic) - 800.0).abs() < 1e-9);
        assert!(loss_derivative(-1.0, 800.0, LossKind::Logistic).is_finite());
    }

    fn grid() -> impl Iterator<Item = f64> {
        (0..=1000).map(|i| -1.0 + 2.0 * i as f64 / 1000.0)
    }

    #[test]
    fn exponential_derivative_is_close_to_minus_label_near_zero() {
        for y in [-1.0, 1.0] {
            for yhat in grid() {
                let d = loss_derivative(y, yhat, LossKind::Exponential);
                assert!((-d - y).abs() <= 2.0 * yhat.abs() + 1e-15, "y={y} yhat={yhat}");
            }
        }
    }

    #[test]
    fn logistic_derivative_bound_needs_the_factor_two() {
        // -ℓ'(0) = y/2 for the plain logistic loss, so |-ℓ' - y| = 1/2 at ŷ = 0.
        let d = loss_derivative(1.0, 0.0, LossKind::Logistic);
        assert_eq!((-d - 1.0).abs(), 0.5);
        // For 2·log(1 + e^{-yŷ}) the gap is |tanh(ŷ/2)| ≤ 2|ŷ|.
        for y in [-1.0, 1.0] {
            for yhat in grid() {
                let d = 2.0 * loss_derivative(y, yhat, LossKind::Logistic);
                assert!((-d - y).abs() <= 2.0 * yhat.abs() + 1e-15, "y={y} yhat={yhat}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for kind in [LossKind::Exponential, LossKind::Logistic] {
            for &(y, yhat) in &[(1.0, 0.3), (-1.0, -2.0), (1.0, -4.5)] {
                let h = 1e-6;
                let fd = (loss_value(y, yhat + h, kind) - loss_value(y, yhat - h, kind)) / (2.0 * h);
                let d = loss_derivative(y, yhat, kind);
                assert!((fd - d).abs() < 1e-7 * d.abs().max(1.0));
            }
        }
    }

    #[test]
    fn softmax_matches_logistic_on_two_classes() {
        // Two logits (0, z) against class 1 equal the logistic loss at margin z.
        let z = 0.7;
        let (v, g) = softmax_cross_entropy(array![0.0, z].view(), 1);
        assert!((v - loss_value(1.0, z, LossKind::Logistic)).abs() < 1e-14);
        assert!((g.sum()).abs() < 1e-14);
        let (big, _) = softmax_cross_entropy(array![1000.0, 0.0].view(), 0);
        assert!(big.is_finite() && big < 1e-300 + 1e-12);
    }
}
