use ndarray::{Array1, ArrayView1};
use serde::Serialize;

use super::analytic::{d0_attack_at, subclass_swap_attack};
use super::{apgd_linf, margin, pgd, AttackResult, AttackSpec, Label, Model};
use crate::data::{Dataset, Targets};
use crate::reference::ReferenceClassifier;
use crate::{par, rng, Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    #[serde(skip)]
    pub delta: Array1<f64>,
    pub margin_before: f64,
    pub margin_after: f64,
    /// The attack turned a correct prediction into a wrong one.
    pub success: bool,
    pub stagnated: bool,
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub samples: Vec<SampleOutcome>,
    pub robust_accuracy: f64,
    pub clean_accuracy: f64,
}

impl AttackReport {
    fn from_samples(samples: Vec<SampleOutcome>) -> Self {
        let n = samples.len().max(1) as f64;
        let clean = samples.iter().filter(|s| s.margin_before > 0.0).count() as f64 / n;
        let robust = samples.iter().filter(|s| s.margin_after > 0.0).count() as f64 / n;
        Self { samples, robust_accuracy: robust, clean_accuracy: clean }
    }

    pub fn max_perturbation(&self, norm: super::Norm) -> f64 {
        self.samples.iter().map(|s| norm.of(s.delta.view())).fold(0.0, f64::max)
    }
}

pub(crate) fn labels(ds: &Dataset) -> Vec<Label> {
    match &ds.targets {
        Targets::Binary { y, .. } => y.iter().map(|&y| Label::Binary(y)).collect(),
        Targets::Multiclass { labels, .. } => labels.iter().map(|&c| Label::Class(c)).collect(),
    }
}

/// Runs the attack described by `spec` (PGD, or APGD when `adaptive`).
pub fn attack<M: Model + ?Sized>(
    model: &M,
    x: ArrayView1<f64>,
    label: Label,
    spec: &AttackSpec,
    index: u64,
) -> Result<AttackResult> {
    let mut r = rng::stream(spec.seed, index);
    if spec.adaptive {
        apgd_linf(model, x, label, spec, &mut r)
    } else {
        pgd(model, x, label, spec, &mut r)
    }
}

fn check(model_dim: usize, model_outputs: usize, ds: &Dataset) -> Result<()> {
    if ds.dim() != model_dim {
        return Err(Error::DimensionMismatch { expected: model_dim, got: ds.dim() });
    }
    if ds.outputs() != model_outputs {
        return Err(Error::DimensionMismatch { expected: model_outputs, got: ds.outputs() });
    }
    Ok(())
}

/// Fraction of samples still classified correctly under the attack. Samples
/// that are already wrong are not attacked. Each sample uses its own seeded
/// stream, so the result does not depend on thread scheduling.
pub fn robust_accuracy<M: Model + ?Sized>(model: &M, ds: &Dataset, spec: &AttackSpec) -> Result<AttackReport> {
    spec.validate()?;
    check(model.dim(), model.outputs(), ds)?;
    let labels = labels(ds);
    let outcomes = par::map_indexed(ds.len(), |i| -> Result<SampleOutcome> {
        let x = ds.x.row(i);
        let before = margin(model.value(x).view(), labels[i]);
        if before <= 0.0 {
            return Ok(SampleOutcome {
                delta: Array1::zeros(x.len()),
                margin_before: before,
                margin_after: before,
                success: false,
                stagnated: false,
            });
        }
        let res = attack(model, x, labels[i], spec, i as u64)?;
        let after = -res.objective;
        Ok(SampleOutcome {
            delta: res.delta,
            margin_before: before,
            margin_after: after,
            success: after <= 0.0,
            stagnated: res.stagnated,
        })
    });
    Ok(AttackReport::from_samples(outcomes.into_iter().collect::<Result<_>>()?))
}

/// Robust accuracy of a closed-form classifier at ℓ2 radius `spec.radius`:
/// a sample counts as robust only if it survives PGD, the `d₀` direction and
/// the swap toward every opposite-class center, all at that radius.
///
/// PGD alone can stall on these piecewise-polynomial functions (for `p ≥ 2`
/// the inactive terms have zero gradient), so the analytic directions are
/// needed to certify non-robustness.
pub fn oracle_robust_accuracy(
    reference: &ReferenceClassifier,
    ds: &Dataset,
    spec: &AttackSpec,
) -> Result<AttackReport> {
    spec.validate()?;
    if spec.norm != super::Norm::L2 {
        return Err(Error::InvalidParameter("analytic attacks are l2".into()));
    }
    check(reference.basis().dim(), 1, ds)?;
    let z = ds.subclasses().ok_or_else(|| Error::InvalidParameter("oracle attacks need subclass labels".into()))?;
    let basis = reference.basis();
    let labels = labels(ds);
    let r = spec.radius;
    let outcomes = par::map_indexed(ds.len(), |i| -> Result<SampleOutcome> {
        let x = ds.x.row(i);
        let Label::Binary(y) = labels[i] else { unreachable!("binary checked") };
        let before = y * reference.eval_unchecked(x);
        let mut worst_margin = before;
        let mut worst_delta = Array1::zeros(x.len());
        let mut stagnated = false;
        if before > 0.0 && r > 0.0 {
            let mut consider = |pt: Array1<f64>| {
                let m = y * reference.eval_unchecked(pt.view());
                if m < worst_margin {
                    worst_margin = m;
                    worst_delta = &pt - &x;
                }
            };
            consider(d0_attack_at(basis, x, y, r));
            for target in basis.opposite(z[i]) {
                consider(subclass_swap_attack(basis, x, z[i], target, r));
            }
            let res = attack(reference, x, labels[i], spec, i as u64)?;
            stagnated = res.stagnated;
            consider(&x + &res.delta);
        }
        Ok(SampleOutcome {
            delta: worst_delta,
            margin_before: before,
            margin_after: worst_margin,
            success: before > 0.0 && worst_margin <= 0.0,
            stagnated,
        })
    });
    Ok(AttackReport::from_samples(outcomes.into_iter().collect::<Result<_>>()?))
}
