//! Location of the 50%-robust-accuracy crossover radius.

use serde::Serialize;

use super::{ExperimentConfig, Output, RadiusConfig};
use crate::attacks::{oracle_robust_accuracy, robust_accuracy, AttackSpec, Norm};
use crate::data::{make_basis, sample_synthetic, ClusterSpec, Dataset};
use crate::reference::ReferenceClassifier;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Crossover {
    pub model: String,
    /// Midpoint of the final bracket.
    pub radius: f64,
    /// Largest radius seen with robust accuracy ≥ 1/2.
    pub lo: f64,
    /// Smallest radius seen with robust accuracy < 1/2.
    pub hi: f64,
    /// Predicted critical radius, when there is one.
    pub predicted: Option<f64>,
}

impl Crossover {
    /// The crossover lies within `(0.9, 1.1)` times the prediction.
    pub fn brackets_prediction(&self) -> Option<bool> {
        self.predicted.map(|r| self.radius > 0.9 * r && self.radius < 1.1 * r)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Probe {
    radius: f64,
    robust_accuracy: f64,
}

/// `(lo, hi, probes)`: the final bracket and every `(radius, accuracy)` probed.
pub type Bracket = (f64, f64, Vec<(f64, f64)>);

/// Bisection on `[0, max_radius]` for the radius where `acc` drops below one
/// half. Robust accuracy is treated as non-increasing in the radius.
pub fn crossover<F>(max_radius: f64, bisections: usize, mut acc: F) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(max_radius > 0.0) {
        return Err(Error::InvalidParameter("max_radius must be > 0".into()));
    }
    let mut probes = Vec::new();
    let a_hi = acc(max_radius)?;
    probes.push((max_radius, a_hi));
    if a_hi >= 0.5 {
        return Err(Error::Domain(format!("robust accuracy {a_hi} >= 1/2 at the largest radius {max_radius}")));
    }
    let (mut lo, mut hi) = (0.0, max_radius);
    for _ in 0..bisections {
        let mid = 0.5 * (lo + hi);
        let a = acc(mid)?;
        probes.push((mid, a));
        if a >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi, probes))
}

fn locate<F>(
    name: String,
    predicted: Option<f64>,
    rc: &RadiusConfig,
    probes: &mut Vec<(String, Probe)>,
    acc: F,
) -> Result<Crossover>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (lo, hi, seen) = crossover(rc.max_radius, rc.bisections, acc)?;
    probes.extend(seen.into_iter().map(|(radius, robust_accuracy)| (name.clone(), Probe { radius, robust_accuracy })));
    Ok(Crossover { model: name, radius: 0.5 * (lo + hi), lo, hi, predicted })
}

#[derive(Debug, Clone)]
pub struct RadiusReport {
    pub crossovers: Vec<Crossover>,
}

impl RadiusReport {
    pub fn get(&self, model: &str) -> Option<&Crossover> {
        self.crossovers.iter().find(|c| c.model == model)
    }
}

fn test_set(cluster: &ClusterSpec, rc: &RadiusConfig) -> Result<(crate::data::SubclassBasis, Dataset)> {
    let basis = make_basis(cluster, rc.basis)?;
    let ds = sample_synthetic(cluster, &basis, rc.n_test, &mut rng::stream(cluster.seed, 2))?;
    Ok((basis, ds))
}

pub fn run_critical_radius(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<RadiusReport> {
    let rc = cfg.radius.as_ref().ok_or_else(|| Error::Config("critical radius needs a [radius] table".into()))?;
    if rc.attack.norm != Norm::L2 {
        return Err(Error::Config("the critical radius is an l2 quantity".into()));
    }
    let (basis, ds) = test_set(&rc.cluster, rc)?;
    let k = basis.k() as f64;
    let mut probes = Vec::new();
    let mut crossovers = Vec::new();

    let refs = [
        (ReferenceClassifier::f(basis.clone()), "F".to_string(), 1.0 / k.sqrt()),
        (ReferenceClassifier::fp(basis.clone(), rc.p_ref)?, format!("F^({})", rc.p_ref), 0.5 * 2f64.sqrt()),
    ];
    for (r, name, pred) in &refs {
        let c = locate(name.clone(), Some(*pred), rc, &mut probes, |radius| {
            Ok(oracle_robust_accuracy(r, &ds, &AttackSpec { radius, ..rc.attack })?.robust_accuracy)
        })?;
        crossovers.push(c);
    }

    if let Some(s) = &rc.trained {
        let lean = super::SynthConfig { alphas: vec![], radii: vec![], ..s.clone() };
        let synth_cfg = ExperimentConfig { synth: Some(lean), ..cfg.clone() };
        let report = super::run_conjecture_validate(&synth_cfg, None)?;
        let (_, test) = super::synth_data(&s.cluster, &make_basis(&s.cluster, s.basis)?, s.n_train, s.n_test, 0)?;
        for m in &report.main {
            let name = format!("trained p={}", m.run.p);
            let c = locate(name, None, rc, &mut probes, |radius| {
                Ok(robust_accuracy(&m.net, &test, &AttackSpec { radius, ..s.attack })?.robust_accuracy)
            })?;
            crossovers.push(c);
        }
    }

    if let Some(o) = out {
        let mut w = o.csv("crossover.csv")?;
        for c in &crossovers {
            w.serialize(c)?;
        }
        w.flush()?;
        let mut w = o.csv("radius_probes.csv")?;
        w.write_record(["model", "radius", "robust_accuracy"])?;
        for (m, p) in &probes {
            w.write_record([m.clone(), p.radius.to_string(), p.robust_accuracy.to_string()])?;
        }
        w.flush()?;
    }
    Ok(RadiusReport { crossovers })
}
