//! Experiment configuration: a TOML document with one table per pipeline.
//!
//! Every nested structure carries its own seed. [`ExperimentConfig::with_seed`]
//! rewrites all of them from the root seed, so a preset plus a seed fully
//! determines a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{AttackSpec, Norm};
use crate::data::{BasisMode, ClusterSpec};
use crate::net::{DirectionLaw, InitSpec, LossKind, Optimizer, Reduction, TrainConfig};
use crate::reference::DistConfig;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ConjectureValidate,
    CriticalRadius,
    MnistParity,
    MnistDigits,
    TheorySuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Output directory; the CLI's `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<RadiusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist: Option<MnistConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryConfig>,
}

/// Training on the subclass-cluster model (conjecture validation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub cluster: ClusterSpec,
    #[serde(default)]
    pub basis: BasisMode,
    pub h: usize,
    pub ps: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub init: InitSpec,
    pub train: TrainConfig,
    /// Noise levels of the distance sweep; `cluster.alpha` is the level used
    /// for alignment and robustness reports.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Independent trainings per `(α, p)` in the distance sweep.
    #[serde(default = "one")]
    pub repeats: usize,
    pub dist: DistConfig,
    /// ℓ2 attack template; its radius is replaced by each entry of `radii`.
    pub attack: AttackSpec,
    pub radii: Vec<f64>,
    #[serde(default = "decile")]
    pub top_fraction: f64,
}

/// Robust-accuracy crossover search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusConfig {
    pub cluster: ClusterSpec,
    #[serde(default)]
    pub basis: BasisMode,
    pub n_test: usize,
    /// Exponent of the `F^(p)` reference.
    pub p_ref: f64,
    pub attack: AttackSpec,
    /// Largest radius of the search interval.
    pub max_radius: f64,
    /// Bisection steps on the radius.
    pub bisections: usize,
    /// Also locate the crossover of networks trained with this setup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trained: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistConfig {
    /// Directory with the four IDX files; falls back to `$MNIST_DIR`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub h: usize,
    pub ps: Vec<f64>,
    pub train: TrainConfig,
    /// Truncate the training split (all samples when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    /// Test samples used for the attack sweeps.
    pub n_attack: usize,
    /// ℓ∞ APGD template; radius replaced by each entry of `linf_radii`.
    pub attack: AttackSpec,
    pub linf_radii: Vec<f64>,
    /// Extra ℓ2 / ℓ1 PGD radii for the multi-norm grid (digits mode).
    #[serde(default)]
    pub l2_radii: Vec<f64>,
    #[serde(default)]
    pub l1_radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    /// Cone samples per `(p, δ, sign, target)`.
    pub cone_samples: usize,
    /// Random configurations for the gradient check.
    pub grad_configs: usize,
    /// Random `z` vectors for the `g_p` convexity check.
    pub gp_draws: usize,
    /// Monte Carlo samples per bound check.
    pub mc_samples: usize,
    /// Negate the extremal field (mutation check of the suite itself).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inject_sign_flip: bool,
}

fn one() -> usize {
    1
}
fn decile() -> f64 {
    0.1
}

pub const PRESETS: &[&str] = &[
    "synth-desk",
    "synth-k20",
    "synth-full",
    "radius",
    "radius-closed-form",
    "mnist-parity",
    "mnist-digits",
    "theory",
];

fn synth_desk() -> SynthConfig {
    SynthConfig {
        cluster: ClusterSpec { d: 200, k: 6, k1: 4, alpha: 0.05, seed: 0 },
        basis: BasisMode::RandomOrthogonal,
        h: 400,
        ps: vec![1.0, 3.0],
        n_train: 400,
        n_test: 500,
        init: InitSpec { epsilon: 1e-6, law: DirectionLaw::Gaussian, balanced: true, seed: 0 },
        train: TrainConfig {
            loss: LossKind::Logistic,
            optimizer: Optimizer::Sgd,
            step_size: 0.5,
            batch_size: 400,
            epochs: 20_000,
            seed: 0,
            record_every: 100,
            reduction: Reduction::Mean,
            target_loss: Some(1e-3),
        },
        alphas: vec![0.0, 0.05, 0.1],
        repeats: 1,
        dist: DistConfig::default(),
        attack: AttackSpec::new(Norm::L2, 0.5),
        radii: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
        top_fraction: 0.1,
    }
}

fn synth_k20() -> SynthConfig {
    let mut s = synth_desk();
    s.cluster = ClusterSpec { d: 200, k: 20, k1: 8, alpha: 0.05, seed: 0 };
    s.h = 800;
    s.n_train = 800;
    s.train.batch_size = 800;
    s
}

/// The full-size run: D=1000, K=10, h=2000, std 1e−7, SGD with batch 100 and
/// step 0.2 for 2·10⁵ epochs. Long-running.
fn synth_full() -> SynthConfig {
    let mut s = synth_desk();
    s.cluster = ClusterSpec { d: 1000, k: 10, k1: 6, alpha: 0.1, seed: 0 };
    s.h = 2000;
    s.n_train = 1000;
    s.n_test = 1000;
    s.init.epsilon = 1e-7;
    s.train = TrainConfig {
        loss: LossKind::Logistic,
        optimizer: Optimizer::Sgd,
        step_size: 0.2,
        batch_size: 100,
        epochs: 200_000,
        seed: 0,
        record_every: 1000,
        reduction: Reduction::Mean,
        target_loss: None,
    };
    s.alphas = vec![0.0, 0.05, 0.1, 0.15, 0.2];
    s.repeats = 10;
    s
}

fn radius_closed_form() -> RadiusConfig {
    RadiusConfig {
        cluster: ClusterSpec { d: 1000, k: 10, k1: 6, alpha: 0.01, seed: 0 },
        basis: BasisMode::RandomOrthogonal,
        n_test: 2000,
        p_ref: 2.0,
        attack: AttackSpec::new(Norm::L2, 0.0),
        max_radius: 1.5,
        bisections: 12,
        trained: None,
    }
}

fn mnist(digits: bool) -> MnistConfig {
    MnistConfig {
        dir: None,
        h: 500,
        ps: vec![1.0, 2.0, 3.0, 4.0],
        train: TrainConfig {
            loss: LossKind::CrossEntropy,
            optimizer: Optimizer::adam(),
            step_size: 1e-3,
            batch_size: 1000,
            epochs: 50,
            seed: 0,
            record_every: 1,
            reduction: Reduction::Mean,
            target_loss: None,
        },
        n_train: None,
        n_attack: 1000,
        attack: AttackSpec {
            steps: 100,
            restarts: 1,
            adaptive: true,
            clip: Some((0.0, 1.0)),
            ..AttackSpec::new(Norm::Linf, 0.0)
        },
        linf_radii: vec![0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15],
        l2_radii: if digits { vec![0.5, 1.0, 1.5] } else { vec![] },
        l1_radii: if digits { vec![5.0, 10.0] } else { vec![] },
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let base = |experiment| ExperimentConfig {
            experiment,
            seed,
            out: None,
            synth: None,
            radius: None,
            mnist: None,
            theory: None,
        };
        let cfg = match name {
            "synth-desk" => ExperimentConfig { synth: Some(synth_desk()), ..base(ExperimentKind::ConjectureValidate) },
            "synth-k20" => ExperimentConfig { synth: Some(synth_k20()), ..base(ExperimentKind::ConjectureValidate) },
            "synth-full" => ExperimentConfig { synth: Some(synth_full()), ..base(ExperimentKind::ConjectureValidate) },
            "radius" => {
                let mut r = radius_closed_form();
                r.trained = Some(synth_desk());
                ExperimentConfig { radius: Some(r), ..base(ExperimentKind::CriticalRadius) }
            }
            "radius-closed-form" => {
                ExperimentConfig { radius: Some(radius_closed_form()), ..base(ExperimentKind::CriticalRadius) }
            }
            "mnist-parity" => ExperimentConfig { mnist: Some(mnist(false)), ..base(ExperimentKind::MnistParity) },
            "mnist-digits" => ExperimentConfig { mnist: Some(mnist(true)), ..base(ExperimentKind::MnistDigits) },
            "theory" => ExperimentConfig {
                synth: Some(SynthConfig { alphas: vec![], radii: vec![0.5], ..synth_desk() }),
                radius: Some(radius_closed_form()),
                theory: Some(TheoryConfig::default()),
                ..base(ExperimentKind::TheorySuite)
            },
            other => return Err(Error::Config(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
        };
        Ok(cfg.with_seed(seed))
    }

    /// Default preset of each experiment kind.
    pub fn default_preset(kind: ExperimentKind) -> &'static str {
        match kind {
            ExperimentKind::ConjectureValidate => "synth-desk",
            ExperimentKind::CriticalRadius => "radius",
            ExperimentKind::MnistParity => "mnist-parity",
            ExperimentKind::MnistDigits => "mnist-digits",
            ExperimentKind::TheorySuite => "theory",
        }
    }

    /// Sets the root seed and re-derives every nested seed from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        let d = |label: u64| rng::derive(seed, label);
        if let Some(s) = self.synth.as_mut() {
            reseed_synth(s, seed);
        }
        if let Some(r) = self.radius.as_mut() {
            r.cluster.seed = d(0x20);
            r.attack.seed = d(0x21);
            if let Some(t) = r.trained.as_mut() {
                reseed_synth(t, d(0x22));
            }
        }
        if let Some(m) = self.mnist.as_mut() {
            m.train.seed = d(0x30);
            m.attack.seed = d(0x31);
        }
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the serialized configuration, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Checks that the table needed by `experiment` is present.
    pub fn validate(&self) -> Result<()> {
        let missing = |t: &str| Err(Error::Config(format!("experiment {:?} needs a [{t}] table", self.experiment)));
        match self.experiment {
            ExperimentKind::ConjectureValidate if self.synth.is_none() => missing("synth"),
            ExperimentKind::CriticalRadius if self.radius.is_none() => missing("radius"),
            ExperimentKind::MnistParity | ExperimentKind::MnistDigits if self.mnist.is_none() => missing("mnist"),
            ExperimentKind::TheorySuite if self.theory.is_none() => missing("theory"),
            _ => Ok(()),
        }
    }
}

fn reseed_synth(s: &mut SynthConfig, seed: u64) {
    s.cluster.seed = rng::derive(seed, 0x10);
    s.init.seed = rng::derive(seed, 0x11);
    s.train.seed = rng::derive(seed, 0x12);
    s.dist.seed = rng::derive(seed, 0x13);
    s.attack.seed = rng::derive(seed, 0x14);
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self { cone_samples: 1000, grad_configs: 1000, gp_draws: 1000, mc_samples: 10_000, inject_sign_flip: false }
    }
}
