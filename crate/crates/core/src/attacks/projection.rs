use ndarray::{Array1, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    L2,
    Linf,
    L1,
}

impl Norm {
    pub fn of(self, x: ArrayView1<f64>) -> f64 {
        match self {
            Norm::L2 => x.dot(&x).sqrt(),
            Norm::Linf => x.fold(0.0, |m, v| m.max(v.abs())),
            Norm::L1 => x.fold(0.0, |s, v| s + v.abs()),
        }
    }

    /// Euclidean projection onto the ball of radius `r` around 0.
    pub fn project(self, mut x: ArrayViewMut1<f64>, r: f64) {
        match self {
            Norm::L2 => project_l2(x, r),
            Norm::Linf => x.mapv_inplace(|v| v.clamp(-r, r)),
            Norm::L1 => project_l1(x, r),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::Linf => "linf",
            Norm::L1 => "l1",
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn project_l2(mut x: ArrayViewMut1<f64>, r: f64) {
    let n = x.dot(&x).sqrt();
    if n > r {
        let s = if n > 0.0 { r / n } else { 0.0 };
        x.mapv_inplace(|v| v * s);
    }
}

/// Projection onto the ℓ1 ball by soft-thresholding at the level found by
/// sorting magnitudes (Duchi et al.).
pub fn project_l1(mut x: ArrayViewMut1<f64>, r: f64) {
    let total: f64 = x.iter().map(|v| v.abs()).sum();
    if total <= r {
        return;
    }
    if r <= 0.0 {
        x.fill(0.0);
        return;
    }
    let mut u: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - r) / (i + 1) as f64;
        if ui > t {
            theta = t;
        } else {
            break;
        }
    }
    x.mapv_inplace(|v| v.signum() * (v.abs() - theta).max(0.0));
}

/// Steepest-ascent direction of unit dual norm for the given ball.
pub fn ascent_direction(norm: Norm, g: ArrayView1<f64>) -> Option<Array1<f64>> {
    match norm {
        Norm::L2 => {
            let n = g.dot(&g).sqrt();
            (n > 0.0 && n.is_finite()).then(|| g.mapv(|v| v / n))
        }
        Norm::Linf => {
            let d = g.mapv(|v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            });
            d.iter().any(|&v| v != 0.0).then_some(d)
        }
        Norm::L1 => {
            let (i, &gi) = g.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
            if gi == 0.0 || !gi.is_finite() {
                return None;
            }
            let mut d = Array1::zeros(g.len());
            d[i] = gi.signum();
            Some(d)
        }
    }
}
