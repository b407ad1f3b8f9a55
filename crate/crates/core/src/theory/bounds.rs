//! Monte Carlo estimates of the clean-accuracy and robustness events of the
//! subclass model, with Wilson intervals.
//!
//! The bounds carry an unknown constant `C`, so only their direction is
//! checked: an event bounded toward 1 must estimate above 0.99 and an event
//! bounded toward 0 below 0.01 in the regimes where the exponent is large.

use serde::Serialize;

use crate::attacks::{d0_attack, oracle_robust_accuracy, AttackSpec, Norm};
use crate::data::{sample_synthetic, ClusterSpec};
use crate::reference::ReferenceClassifier;
use crate::{par, rng, Error, Result};

pub const MIN_SAMPLES: usize = 10_000;
const CHUNK: usize = 1024;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BoundEvent {
    /// `F(x)·y > 0`.
    Clean,
    /// `F(x − y(1+ρ)/√K · d₀)·y > 0`.
    D0Attack { rho: f64 },
    /// The classifier keeps the sign under every ℓ2 perturbation of radius
    /// `(√2 − δ)/2` (PGD plus the analytic directions).
    PgdRobust { delta: f64 },
}

impl BoundEvent {
    pub fn describe(&self) -> String {
        match self {
            BoundEvent::Clean => "P[F(x) y > 0]".into(),
            BoundEvent::D0Attack { rho } => format!("P[F(x - y(1+{rho})/sqrt(K) d0) y > 0]"),
            BoundEvent::PgdRobust { delta } => {
                format!("P[min_(|d|<=1) F(x + (sqrt2-{delta})/2 d) y > 0]")
            }
        }
    }

    fn expectation(&self) -> Expectation {
        match self {
            BoundEvent::D0Attack { .. } => Expectation::NearZero,
            _ => Expectation::NearOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    NearOne,
    NearZero,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub event: String,
    pub n: usize,
    pub hits: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Functional form of the bound, up to the unknown constant `C`.
    pub bound: String,
    pub expectation: Expectation,
    pub note: &'static str,
}

impl BoundCheck {
    /// The estimate lies on the side of the bound's direction.
    pub fn consistent(&self) -> bool {
        match self.expectation {
            Expectation::NearOne => self.estimate > 0.99,
            Expectation::NearZero => self.estimate < 0.01,
        }
    }
}

/// 95% Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let phat = hits as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (phat + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn bound_form(event: &BoundEvent, classifier: &ReferenceClassifier) -> String {
    use crate::reference::ReferenceKind;
    match (event, classifier.kind()) {
        (BoundEvent::Clean, ReferenceKind::F) => ">= 1 - 4 exp(-C D / (4 alpha^2 K))".into(),
        (BoundEvent::Clean, ReferenceKind::Fp { .. }) => ">= 1 - 2(K+1) exp(-C D / (alpha^2 K^2))".into(),
        (BoundEvent::D0Attack { .. }, _) => "<= 2 exp(-C D rho^2 / (K alpha^2))".into(),
        (BoundEvent::PgdRobust { .. }, _) => ">= 1 - 2(K+1) exp(-C D delta^2 / (2 K^2 alpha^2))".into(),
    }
}

/// Estimates `P[event]` over `n ≥ 10⁴` fresh draws from the cluster model.
/// Draws come in fixed-size chunks, each from its own seeded stream, so the
/// estimate is independent of the thread count.
pub fn mc_bound_check(
    classifier: &ReferenceClassifier,
    spec: &ClusterSpec,
    event: BoundEvent,
    n: usize,
) -> Result<BoundCheck> {
    spec.validate()?;
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let basis = classifier.basis();
    let chunks = n.div_ceil(CHUNK);
    let counts = par::map_indexed(chunks, |c| -> Result<usize> {
        let size = CHUNK.min(n - c * CHUNK);
        let mut r = rng::stream(spec.seed, 0xb0d0_0000 + c as u64);
        let ds = sample_synthetic(spec, basis, size, &mut r)?;
        let y = ds.labels_pm().expect("synthetic data is binary");
        match event {
            BoundEvent::Clean => Ok((0..size).filter(|&i| classifier.eval_unchecked(ds.x.row(i)) * y[i] > 0.0).count()),
            BoundEvent::D0Attack { rho } => Ok((0..size)
                .filter(|&i| {
                    let adv = d0_attack(basis, ds.x.row(i), y[i], rho);
                    classifier.eval_unchecked(adv.view()) * y[i] > 0.0
                })
                .count()),
            BoundEvent::PgdRobust { delta } => {
                let mut a = AttackSpec::new(Norm::L2, (2f64.sqrt() - delta) / 2.0);
                a.seed = rng::derive(spec.seed, c as u64);
                let rep = oracle_robust_accuracy(classifier, &ds, &a)?;
                Ok(rep.samples.iter().filter(|s| s.margin_after > 0.0).count())
            }
        }
    });
    let hits: usize = counts.into_iter().sum::<Result<usize>>()?;
    let (lo, hi) = wilson_interval(hits, n);
    Ok(BoundCheck {
        event: event.describe(),
        n,
        hits,
        estimate: hits as f64 / n as f64,
        ci_low: lo,
        ci_high: hi,
        bound: bound_form(&event, classifier),
        expectation: event.expectation(),
        note: "constant C unknown: direction and scaling trends only",
    })
}
