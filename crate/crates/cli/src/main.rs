//! `prelu`: runs the experiment pipelines from presets or TOML configs.
//!
//! Exit status: 0 on success, 1 when a check fails or a run errors, 2 on
//! usage or configuration errors.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prelu_core::data::make_basis;
use prelu_core::experiments::{
    reference_for, reference_scale, run_conjecture_validate, run_critical_radius, run_mnist, run_theory_suite,
    ExperimentConfig, ExperimentKind, Output, PRESETS,
};
use prelu_core::net::read_checkpoint;
use prelu_core::reference::{dist_estimate, ReferenceClassifier};
use prelu_core::Error;

#[derive(Parser)]
#[command(name = "prelu", version, about = "pReLU network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (see `prelu presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Root seed; every nested seed is re-derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the config and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train pReLU nets on the subclass model and compare with F / F^(p).
    Synth(Common),
    /// Locate the 50%-robust-accuracy crossover radius.
    Radius(Common),
    /// MNIST even/odd classification (needs MNIST_DIR).
    MnistParity(Common),
    /// MNIST ten-digit classification (needs MNIST_DIR).
    MnistDigits(Common),
    /// Run every automated check and write a pass/fail manifest.
    Theory {
        #[command(flatten)]
        common: Common,
        /// Negate the extremal field; the alignment checks should then fail.
        #[arg(long)]
        inject_sign_flip: bool,
    },
    /// Distance of a checkpointed network to a reference classifier.
    Dist {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reference to compare with; by default F for p = 1 and F^(p) otherwise.
        #[arg(long, value_enum)]
        reference: Option<RefChoice>,
    },
    /// List the preset names.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefChoice {
    F,
    Fp,
}

enum Failure {
    Usage(String),
    Check(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::MissingData { .. } => Failure::Usage(e.to_string()),
            e => Failure::Run(e),
        }
    }
}

fn resolve(common: &Common, kind: ExperimentKind) -> Result<ExperimentConfig, Failure> {
    let cfg = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != kind {
                return Err(Failure::Usage(format!(
                    "{} is a {:?} config, not {kind:?}",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        (None, preset) => {
            let name = preset.as_deref().unwrap_or(ExperimentConfig::default_preset(kind));
            let cfg = ExperimentConfig::preset(name, 0)?;
            if cfg.experiment != kind && kind != ExperimentKind::ConjectureValidate {
                return Err(Failure::Usage(format!("preset {name:?} is a {:?} preset", cfg.experiment)));
            }
            cfg
        }
    };
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn output(common: &Common, cfg: &ExperimentConfig, name: &str) -> Result<Output, Failure> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| Path::new("runs").join(format!("{name}-seed{}", cfg.seed)));
    let out = Output::create(&dir, cfg)?;
    eprintln!("writing to {}", out.dir().display());
    Ok(out)
}

fn synth(common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common, ExperimentKind::ConjectureValidate)?;
    let out = output(common, &cfg, "synth")?;
    let rep = run_conjecture_validate(&cfg, Some(&out))?;
    println!("p      iters  loss        test_acc  norm_dist  top_cos_avg  top_cos_sub");
    for m in &rep.main {
        let r = &m.run;
        println!(
            "{:<6} {:<6} {:<11.3e} {:<9.4} {:<10.4} {:<12.4} {:.4}",
            r.p, r.iterations, r.final_loss, r.test_acc, r.normalized_dist, m.top_class_average_min, m.top_subclass_min
        );
    }
    for r in &rep.sweep {
        println!("alpha={} p={} repeat={}: normalized dist {:.4}", r.alpha, r.p, r.repeat, r.normalized_dist);
    }
    for r in &rep.robustness {
        println!("p={} radius={}: robust accuracy {:.3}", r.p, r.radius, r.robust_accuracy);
    }
    Ok(())
}

fn radius(common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common, ExperimentKind::CriticalRadius)?;
    let out = output(common, &cfg, "radius")?;
    let rep = run_critical_radius(&cfg, Some(&out))?;
    let mut failed = Vec::new();
    for c in &rep.crossovers {
        match (c.predicted, c.brackets_prediction()) {
            (Some(p), Some(ok)) => {
                println!("{}: crossover {:.4} (predicted {:.4}, within 10%: {ok})", c.model, c.radius, p);
                if !ok {
                    failed.push(c.model.clone());
                }
            }
            _ => println!("{}: crossover {:.4}", c.model, c.radius),
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("crossover outside the predicted bracket: {}", failed.join(", "))))
    }
}

fn mnist(common: &Common, kind: ExperimentKind) -> Result<(), Failure> {
    let cfg = resolve(common, kind)?;
    let name = if kind == ExperimentKind::MnistDigits { "mnist-digits" } else { "mnist-parity" };
    let out = output(common, &cfg, name)?;
    let rep = run_mnist(&cfg, Some(&out))?;
    for r in &rep.runs {
        println!("p={}: test accuracy {:.4}, stable rank {:.2}", r.p, r.test_acc, r.stable_rank);
    }
    for c in &rep.attacks {
        println!("p={} {} radius={}: robust accuracy {:.3}", c.p, c.norm.name(), c.radius, c.robust_accuracy);
    }
    Ok(())
}

fn theory(common: &Common, flip: bool) -> Result<(), Failure> {
    let mut cfg = resolve(common, ExperimentKind::TheorySuite)?;
    if flip {
        if let Some(t) = cfg.theory.as_mut() {
            t.inject_sign_flip = true;
        }
    }
    let out = output(common, &cfg, "theory")?;
    let rep = run_theory_suite(&cfg, Some(&out))?;
    for c in &rep.checks {
        let tag = c.criterion.map(|n| format!("[{n}] ")).unwrap_or_default();
        println!("{} {tag}{} ({:.1}s): {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.seconds, c.detail);
    }
    let failed: Vec<&str> = rep.failures().map(|c| c.id.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", rep.checks.len());
        Ok(())
    } else {
        Err(Failure::Check(format!("{} of {} checks failed: {}", failed.len(), rep.checks.len(), failed.join(", "))))
    }
}

fn dist(common: &Common, checkpoint: &Path, choice: Option<RefChoice>) -> Result<(), Failure> {
    let cfg = resolve(common, ExperimentKind::ConjectureValidate)?;
    let s = cfg.synth.as_ref().ok_or_else(|| Failure::Usage("dist needs a config with a [synth] table".into()))?;
    let file = File::open(checkpoint).map_err(|e| Failure::Usage(format!("{}: {e}", checkpoint.display())))?;
    let net = read_checkpoint(BufReader::new(file))?;
    let basis = make_basis(&s.cluster, s.basis)?;
    let reference = match choice {
        None => reference_for(net.p, &basis)?,
        Some(RefChoice::F) => ReferenceClassifier::f(basis),
        Some(RefChoice::Fp) => ReferenceClassifier::fp(basis, net.p)?,
    };
    let rep = dist_estimate(&net, &reference, &s.dist)?;
    let scale = reference_scale(&reference)?;
    let out = output(common, &cfg, "dist")?;
    let mut w = out.csv("dist.csv")?;
    w.write_record(["checkpoint", "reference", "p", "dist", "normalized_dist", "c_hat", "clamped"])
        .map_err(Error::from)?;
    w.write_record([
        checkpoint.display().to_string(),
        format!("{:?}", reference.kind()),
        net.p.to_string(),
        rep.dist.to_string(),
        (rep.dist / scale).to_string(),
        rep.c_hat.to_string(),
        rep.clamped.to_string(),
    ])
    .map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    println!(
        "dist {:.6} (normalized {:.4}), c_hat {:.6}{}",
        rep.dist,
        rep.dist / scale,
        rep.c_hat,
        if rep.clamped { " (clamped)" } else { "" }
    );
    Ok(())
}

fn print_config(common: &Common, kind: ExperimentKind) -> Result<bool, Failure> {
    if !common.print_config {
        return Ok(false);
    }
    print!("{}", resolve(common, kind)?.to_toml()?);
    Ok(true)
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    let (common, kind) = match &cmd {
        Command::Synth(c) | Command::Dist { common: c, .. } => (c, ExperimentKind::ConjectureValidate),
        Command::Radius(c) => (c, ExperimentKind::CriticalRadius),
        Command::MnistParity(c) => (c, ExperimentKind::MnistParity),
        Command::MnistDigits(c) => (c, ExperimentKind::MnistDigits),
        Command::Theory { common, .. } => (common, ExperimentKind::TheorySuite),
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
            return Ok(());
        }
    };
    if print_config(common, kind)? {
        return Ok(());
    }
    match &cmd {
        Command::Synth(c) => synth(c),
        Command::Radius(c) => radius(c),
        Command::MnistParity(c) => mnist(c, ExperimentKind::MnistParity),
        Command::MnistDigits(c) => mnist(c, ExperimentKind::MnistDigits),
        Command::Theory { common, inject_sign_flip } => theory(common, *inject_sign_flip),
        Command::Dist { common, checkpoint, reference } => dist(common, checkpoint, *reference),
        Command::Presets => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
