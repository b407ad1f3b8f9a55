//! Adversarial attacks and robust-accuracy evaluation.

pub mod analytic;
mod apgd;
mod eval;
mod model;
mod pgd;
mod pixel;
mod projection;

pub use analytic::{d0_attack, d0_direction, subclass_swap_attack};
pub use apgd::{apgd_linf, checkpoints, MOMENTUM};
pub use eval::{attack, oracle_robust_accuracy, robust_accuracy, AttackReport, SampleOutcome};
pub use model::Model;
pub use pgd::{fgsm, margin, margin_gradient, pgd, AttackResult, AttackSpec, Label};
pub use pixel::Normalized;
pub use projection::{ascent_direction, project_l1, project_l2, Norm};
