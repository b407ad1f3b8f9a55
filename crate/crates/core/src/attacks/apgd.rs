use ndarray::{Array1, ArrayView1};
use rand::Rng;

use super::pgd::Attacker;
use super::{ascent_direction, AttackResult, AttackSpec, Label, Model, Norm};
use crate::{Error, Result};

pub const MOMENTUM: f64 = 0.75;

/// Checkpoint iterations `⌈p_j N⌉` with `p_0 = 0`, `p_1 = 0.22`,
/// `p_{j+1} = p_j + max(p_j − p_{j−1} − 0.03, 0.06)`.
pub fn checkpoints(steps: usize) -> Vec<usize> {
    let mut ps: Vec<f64> = vec![0.0, 0.22];
    while *ps.last().expect("nonempty") < 1.0 {
        let n = ps.len();
        let next = ps[n - 1] + (ps[n - 1] - ps[n - 2] - 0.03).max(0.06);
        ps.push(next);
    }
    let mut out: Vec<usize> =
        ps.iter().map(|p| (p * steps as f64).ceil() as usize).filter(|&c| c > 0 && c <= steps).collect();
    out.dedup();
    out
}

/// ℓ∞ attack with momentum and a step size that halves whenever a checkpoint
/// window brings too few improving steps or no gain in the best objective.
/// After halving, iteration resumes from the best point found so far.
pub fn apgd_linf<M: Model + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x: ArrayView1<f64>,
    label: Label,
    spec: &AttackSpec,
    rng: &mut R,
) -> Result<AttackResult> {
    let spec = AttackSpec { norm: Norm::Linf, adaptive: true, ..*spec };
    spec.validate()?;
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    let atk = Attacker { model, x, label, spec: &spec };
    let mut best = Array1::zeros(x.len());
    let mut best_obj = atk.objective(&best);
    let mut trace = Vec::with_capacity(spec.steps * spec.restarts);
    if spec.radius == 0.0 {
        return Ok(AttackResult { delta: best, objective: best_obj, stagnated: true, trace });
    }
    let marks = checkpoints(spec.steps);
    let mut any_gradient = false;
    for restart in 0..spec.restarts {
        let start = if restart == 0 { Array1::zeros(x.len()) } else { atk.random_start(rng) };
        let mut eta = 2.0 * spec.radius;
        let mut cur = start.clone();
        let mut cur_obj = atk.objective(&cur);
        let mut prev = cur.clone();
        let mut run_best = cur.clone();
        let mut run_best_obj = cur_obj;
        let mut improved_steps = 0usize;
        let mut last_mark = 0usize;
        let mut best_at_mark = run_best_obj;
        let mut eta_at_mark = eta;
        let mut halved_at_mark = false;
        for k in 1..=spec.steps {
            let g = atk.gradient(&cur);
            let Some(dir) = ascent_direction(Norm::Linf, g.view()) else {
                trace.push(best_obj.max(run_best_obj));
                break;
            };
            any_gradient = true;
            let mut z = &cur + &(dir * eta);
            atk.project(&mut z);
            let mut next =
                if k == 1 { z } else { &cur + &((&z - &cur) * MOMENTUM) + &((&cur - &prev) * (1.0 - MOMENTUM)) };
            atk.project(&mut next);
            let next_obj = atk.objective(&next);
            if next_obj > cur_obj {
                improved_steps += 1;
            }
            prev = std::mem::replace(&mut cur, next);
            cur_obj = next_obj;
            if cur_obj > run_best_obj {
                run_best_obj = cur_obj;
                run_best.assign(&cur);
            }
            trace.push(best_obj.max(run_best_obj));
            if marks.contains(&k) {
                let window = k - last_mark;
                let few_gains = (improved_steps as f64) < 0.75 * window as f64;
                let stalled = !halved_at_mark && eta_at_mark == eta && best_at_mark == run_best_obj;
                halved_at_mark = few_gains || stalled;
                if halved_at_mark {
                    eta /= 2.0;
                    cur.assign(&run_best);
                    prev.assign(&run_best);
                    cur_obj = run_best_obj;
                }
                improved_steps = 0;
                last_mark = k;
                best_at_mark = run_best_obj;
                eta_at_mark = eta;
            }
        }
        if run_best_obj > best_obj {
            best_obj = run_best_obj;
            best = run_best;
        }
    }
    Ok(AttackResult { delta: best, objective: best_obj, stagnated: !any_gradient, trace })
}
