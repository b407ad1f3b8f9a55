//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Runs as a plain binary (no libtest harness) so the lines always reach the
//! terminal. Exits nonzero if any criterion whose inputs exist fails. A
//! criterion blocked by missing external data is reported as FAIL with the
//! reason and does not change the exit status.

use std::process::{Command, ExitCode};
use std::time::Instant;

use prelu_core::attacks::analytic::default_opposite;
use prelu_core::attacks::{d0_attack, robust_accuracy, subclass_swap_attack, AttackSpec, Norm};
use prelu_core::data::{make_basis, simplified_dataset, BasisMode, ClusterSpec, Dataset, Provenance, Targets};
use prelu_core::experiments::{mnist_dir, run_conjecture_validate, run_critical_radius, run_mnist, ExperimentConfig};
use prelu_core::net::{
    finite_difference_gradient, init_balanced, objective, objective_gradient, DirectionLaw, InitSpec, LossKind,
    PreluNet, Reduction,
};
use prelu_core::reference::{realize, RealizationPlan, ReferenceClassifier, ReferenceKind};
use prelu_core::theory::{
    alignment_bias_sweep, drift_scaling, gp, gp_argmin, gp_second_derivative, small_norm_phase, ExtremalField,
    NeuronSign, SmallNormSpec, SweepTarget,
};
use prelu_core::{linalg, rng, Error, Result};
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Runs `f` and appends the runtime, failing if it exceeds `budget` seconds.
fn timed(budget: Option<f64>, f: impl FnOnce() -> Result<Outcome>) -> Outcome {
    let t = Instant::now();
    let out = f().unwrap_or_else(|e| Outcome::Fail(format!("error: {e}")));
    let s = t.elapsed().as_secs_f64();
    let over = budget.is_some_and(|b| s > b);
    let clock = match budget {
        Some(b) => format!(" [{s:.1}s, budget {b:.0}s]"),
        None => format!(" [{s:.1}s]"),
    };
    match out {
        Outcome::Pass(d) if over => Outcome::Fail(format!("{d}; over the runtime budget{clock}")),
        Outcome::Pass(d) => Outcome::Pass(format!("{d}{clock}")),
        Outcome::Fail(d) => Outcome::Fail(format!("{d}{clock}")),
        b => b,
    }
}

fn basis10(d: usize, seed: u64) -> Result<prelu_core::data::SubclassBasis> {
    make_basis(&ClusterSpec::new(d, 10, 6, 0.0, seed)?, BasisMode::RandomOrthogonal)
}

fn c1_realizability() -> Result<Outcome> {
    let b = basis10(50, 101)?;
    let mut worst = 0.0f64;
    let mut g = rng::from_seed(102);
    let kinds =
        [ReferenceKind::F, ReferenceKind::Fp { p: 1.0 }, ReferenceKind::Fp { p: 2.0 }, ReferenceKind::Fp { p: 3.0 }];
    for kind in kinds {
        let net = realize(kind, 20, &RealizationPlan::even(kind, 20, &b)?, &b)?;
        let r = ReferenceClassifier::new(kind, b.clone())?;
        for _ in 0..10_000 {
            let x = linalg::unit_sphere(50, &mut g);
            worst = worst.max((net.forward(x.view())? - r.eval(x.view())?).abs());
        }
    }
    Ok(verdict(worst <= 1e-9, format!("sup |f_p - ref| over 1e4 sphere points, F and F^(1,2,3): {worst:.2e}")))
}

fn c2_attack_oracle() -> Result<Outcome> {
    let b = basis10(50, 201)?;
    let f = ReferenceClassifier::f(b.clone());
    let f2 = ReferenceClassifier::fp(b.clone(), 2.0)?;
    let crit = 0.5 * 2f64.sqrt();
    let (mut at0, mut flip_d0, mut flip_swap) = (0.0f64, 0, 0);
    for z in 0..10 {
        let (x, y) = (b.center(z), b.label(z));
        at0 = at0.max(f.eval(d0_attack(&b, x, y, 0.0).view())?.abs());
        flip_d0 += usize::from(f.eval(d0_attack(&b, x, y, 0.1).view())? * y < 0.0);
        let s = subclass_swap_attack(&b, x, z, default_opposite(&b, z), 1.1 * crit);
        flip_swap += usize::from(f2.eval(s.view())? * y < 0.0);
    }
    let spec = AttackSpec { steps: 50, restarts: 5, seed: 202, ..AttackSpec::new(Norm::L2, 0.9 * crit) };
    let survive = robust_accuracy(&f2, &simplified_dataset(&b), &spec)?.robust_accuracy;
    let ok = at0 <= 1e-10 && flip_d0 == 10 && flip_swap == 10 && survive == 1.0;
    Ok(verdict(
        ok,
        format!(
            "|F| at rho=0 {at0:.1e}; d0 flips {flip_d0}/10; swap flips {flip_swap}/10; F^(2) PGD survival {survive}"
        ),
    ))
}

fn c3_critical_radius() -> Result<Outcome> {
    let cfg = ExperimentConfig::preset("radius-closed-form", 0)?;
    let rep = run_critical_radius(&cfg, None)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &rep.crossovers {
        let inside = c.brackets_prediction().unwrap_or(false);
        ok &= inside;
        parts.push(format!("{} {:.4} (predicted {:.4})", c.model, c.radius, c.predicted.unwrap_or(f64::NAN)));
    }
    ok &= rep.crossovers.len() == 2;
    Ok(verdict(ok, parts.join(", ")))
}

fn c4_conjecture() -> Result<Outcome> {
    let mut cfg = ExperimentConfig::preset("synth-desk", 0)?;
    let s = cfg.synth.as_mut().expect("preset has synth");
    s.alphas.clear();
    s.radii = vec![0.5];
    let rep = run_conjecture_validate(&cfg, None)?;
    let (m1, m3) = (rep.main_run(1.0).expect("p=1"), rep.main_run(3.0).expect("p=3"));
    let (a1, a3) = (rep.robust_at(1.0, 0.5).expect("r=0.5"), rep.robust_at(3.0, 0.5).expect("r=0.5"));
    let ok_a = m1.top_class_average_min >= 0.98 && m1.run.normalized_dist <= 0.15;
    let ok_b = m3.top_subclass_min >= 0.98 && m3.run.normalized_dist <= 0.15;
    let ok_c = a3 >= 0.9 && a1 <= 0.2;
    Ok(verdict(
        ok_a && ok_b && ok_c,
        format!(
            "(a) p=1 cos {:.4}, dist {:.4}; (b) p=3 cos {:.4}, dist {:.4}; (c) robust@0.5 p=3 {a3:.3}, p=1 {a1:.3}",
            m1.top_class_average_min, m1.run.normalized_dist, m3.top_subclass_min, m3.run.normalized_dist
        ),
    ))
}

fn c5_alignment_signs() -> Result<Outcome> {
    let b = basis10(20, 501)?;
    let mut wrong = Vec::new();
    let mut sweeps = 0;
    for p in [1.0, 3.0, 4.0] {
        let f = ExtremalField::new(simplified_dataset(&b), p)?;
        for delta in [0.05, 0.1, 0.2] {
            for sign in [NeuronSign::Positive, NeuronSign::Negative] {
                let s = alignment_bias_sweep(&f, delta, 1000, SweepTarget::ClassAverage, sign, 502)?;
                sweeps += 1;
                let good = if p == 1.0 { s.all_positive() } else { s.all_negative() };
                if !good || s.accepted != 1000 {
                    wrong.push(format!("p={p} delta={delta} {sign:?} class average"));
                }
                if p >= 3.0 {
                    for k in (0..10).filter(|&k| b.is_positive(k) == (sign == NeuronSign::Positive)) {
                        let s = alignment_bias_sweep(&f, delta, 1000, SweepTarget::Subclass(k), sign, 503 + k as u64)?;
                        sweeps += 1;
                        if !s.all_positive() || s.accepted != 1000 {
                            wrong.push(format!("p={p} delta={delta} {sign:?} mu_{}", k + 1));
                        }
                    }
                }
            }
        }
    }
    let detail = if wrong.is_empty() {
        format!("{sweeps} sweeps x 1000 cone samples, every sign as predicted")
    } else {
        format!("wrong signs in {}", wrong.join(", "))
    };
    Ok(verdict(wrong.is_empty(), detail))
}

fn c6_gp_convexity() -> Result<Outcome> {
    let mut g = rng::from_seed(601);
    let (mut min_g2, mut worst_fd, mut worst_cells) = (f64::INFINITY, 0.0f64, 0.0f64);
    const CELLS: usize = 200;
    for p in [1.0, 2.0, 3.0, 4.0] {
        let cell = (p + 1.0) / CELLS as f64;
        for _ in 0..1000 {
            // A single entry makes g_p constant, so lengths start at 2.
            let z: Vec<f64> = (0..g.random_range(2..=8)).map(|_| g.random_range(0.01..1.0)).collect();
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..=CELLS {
                let q = i as f64 * cell;
                let v = gp(q, &z, p)?;
                let g2 = gp_second_derivative(q, &z, p)?;
                // Richardson-extrapolated second difference; a plain h = 1e-3
                // difference drowns in roundoff where g'' is tiny relative to g.
                let d2 = |h: f64| -> Result<f64> { Ok((gp(q + h, &z, p)? - 2.0 * v + gp(q - h, &z, p)?) / (h * h)) };
                let fd = (4.0 * d2(1e-2)? - d2(2e-2)?) / 3.0;
                min_g2 = min_g2.min(g2);
                worst_fd = worst_fd.max((fd - g2).abs() / g2.abs().max(1e-6 * v));
                if v < best.0 {
                    best = (v, q);
                }
            }
            worst_cells = worst_cells.max((best.1 - gp_argmin(p)).abs() / cell);
        }
    }
    let ok = min_g2 >= -1e-12 && worst_fd <= 1e-4 && worst_cells <= 1.0;
    Ok(verdict(ok, format!("min g'' {min_g2:.2e}; FD rel err {worst_fd:.2e}; argmin off by {worst_cells:.2} cells")))
}

fn c7_balancedness() -> Result<Outcome> {
    let b = basis10(20, 701)?;
    let data = simplified_dataset(&b);
    let mut drift0 = 0.0f64;
    let mut slopes = Vec::new();
    for p in [1.0, 2.0, 3.0, 4.0] {
        let net = init_balanced(64, 20, 1, p, &InitSpec::new(1.0, DirectionLaw::Uniform, 702)?)?;
        drift0 = drift0.max(net.balancedness_drift());
        slopes.push(drift_scaling(&net, &data, LossKind::Exponential, &[1e-2, 1e-3, 1e-4])?.slope);
    }
    let mut norms = Vec::new();
    let mut ok_norm = true;
    for p in [1.0, 2.0, 3.0] {
        let r = small_norm_phase(&b, &SmallNormSpec::new(p, 703))?;
        ok_norm &= r.norm_ok();
        norms.push(format!("{:.2e}/{:.2e}", r.max_norm_sq, r.norm_bound));
    }
    let ok = drift0 <= 1e-15 && slopes.iter().all(|s| (s - 2.0).abs() <= 0.2) && ok_norm;
    Ok(verdict(
        ok,
        format!("init drift {drift0:.1e}; slopes {slopes:.3?}; max |w|^2 vs bound (p=1,2,3) {}", norms.join(", ")),
    ))
}

fn c8_gradients() -> Result<Outcome> {
    let mut g = rng::from_seed(801);
    let (mut worst, mut redrawn) = (0.0f64, 0);
    for p in [1.0, 2.0, 3.0, 4.0] {
        let mut done = 0;
        while done < 1000 {
            let classes = if done % 2 == 0 { 1 } else { 3 };
            let w = linalg::gaussian_matrix(5, 6, &mut g);
            let v = linalg::gaussian_matrix(5, classes, &mut g);
            let x = linalg::gaussian_matrix(4, 6, &mut g);
            if x.dot(&w.t()).iter().any(|a| a.abs() <= 1e-3) {
                continue;
            }
            let (targets, kind) = if classes == 1 {
                let y = (0..4).map(|_| if g.random() { 1.0 } else { -1.0 }).collect();
                (Targets::Binary { y, z: None }, LossKind::Exponential)
            } else {
                let labels = (0..4).map(|_| g.random_range(0..classes)).collect();
                (Targets::Multiclass { labels, classes }, LossKind::CrossEntropy)
            };
            let ds = Dataset::new(x, targets, Provenance::Imported)?;
            let net = PreluNet::new(w, v, p)?;
            let (_, an) = objective_gradient(&net, &ds, kind, Reduction::Sum)?;
            let fd =
                finite_difference_gradient(&net, 1e-6, |n| objective(n, &ds, kind, Reduction::Sum).unwrap_or(f64::NAN));
            // All neurons dead or softmax saturated: the gradient is below what a
            // step-1e-6 central difference can resolve, so draw again.
            if fd.norm() < 1e-4 {
                redrawn += 1;
                continue;
            }
            worst = worst.max(an.relative_error(&fd));
            done += 1;
        }
    }
    Ok(verdict(
        worst < 1e-5,
        format!("max relative error {worst:.2e} over 1000 smooth configs per p ({redrawn} vanishing-gradient draws redrawn)"),
    ))
}

fn c9_mnist() -> Result<Outcome> {
    let cfg = ExperimentConfig::preset("mnist-parity", 0)?;
    let m = cfg.mnist.as_ref().expect("preset has mnist");
    let dir = match mnist_dir(m) {
        Ok(d) => d,
        Err(Error::MissingData { .. }) => {
            return Ok(Outcome::Blocked(
                "MNIST IDX files not found (set MNIST_DIR to the directory holding them)".into(),
            ))
        }
        Err(e) => return Err(e),
    };
    let rep = match run_mnist(&cfg, None) {
        Err(Error::MissingData { expected }) => {
            return Ok(Outcome::Blocked(format!("MNIST IDX files not found in {}: {expected:?}", dir.display())))
        }
        r => r?,
    };
    let accs: Vec<f64> = rep.runs.iter().map(|r| r.test_acc).collect();
    let r1 = rep.robust(1.0, Norm::Linf, 0.1).expect("linf 0.1 cell");
    let r4 = rep.robust(4.0, Norm::Linf, 0.1).expect("linf 0.1 cell");
    let (s1, s4) = (rep.run(1.0).expect("p=1").stable_rank, rep.run(4.0).expect("p=4").stable_rank);
    let ok = accs.iter().all(|&a| a >= 0.95) && r4 - r1 >= 0.35 && s4 > s1;
    Ok(verdict(
        ok,
        format!("clean acc p=1..4 {accs:.4?}; APGD linf 0.1: p=4 {r4:.3} vs p=1 {r1:.3}; stable rank p=4 {s4:.2} vs p=1 {s1:.2}"),
    ))
}

fn c10_theory_gate() -> Result<Outcome> {
    let out = std::env::temp_dir().join(format!("prelu-acceptance-theory-{}", std::process::id()));
    let res = Command::new(env!("CARGO_BIN_EXE_prelu")).arg("theory").arg("--out").arg(&out).output()?;
    let stdout = String::from_utf8_lossy(&res.stdout);
    let covered: Vec<u8> = (1..=8).filter(|n| stdout.contains(&format!("[{n}]"))).collect();
    let _ = std::fs::remove_dir_all(&out);
    let code = res.status.code();
    let last = stdout.lines().last().unwrap_or("").to_string();
    Ok(verdict(
        code == Some(0) && covered.len() == 8,
        format!("`prelu theory` exit {code:?}, criteria covered {covered:?}; {last}"),
    ))
}

/// Number, name, runtime budget in seconds, check.
type Criterion = (u8, &'static str, Option<f64>, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "realizability", Some(10.0), c1_realizability),
        (2, "closed-form attack oracle", Some(60.0), c2_attack_oracle),
        (3, "critical-radius bracketing", Some(300.0), c3_critical_radius),
        (4, "conjecture validation (desk scale)", Some(1200.0), c4_conjecture),
        (5, "alignment-bias signs", Some(60.0), c5_alignment_signs),
        (6, "g_p convexity", Some(10.0), c6_gp_convexity),
        (7, "balancedness and small-norm phase", Some(120.0), c7_balancedness),
        (8, "gradient correctness", Some(30.0), c8_gradients),
        (9, "MNIST parity", None, c9_mnist),
        (10, "theory-suite gate", Some(600.0), c10_theory_gate),
    ];
    let mut hard_fail = false;
    for (n, name, budget, f) in criteria {
        match timed(budget, f) {
            Outcome::Pass(d) => println!("PASS criterion {n} ({name}): {d}"),
            Outcome::Fail(d) => {
                hard_fail = true;
                println!("FAIL criterion {n} ({name}): {d}");
            }
            Outcome::Blocked(d) => println!("FAIL criterion {n} ({name}): BLOCKED: {d}"),
        }
    }
    if hard_fail {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
