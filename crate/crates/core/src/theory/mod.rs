//! Numerical counterparts of the analysis: extremal vectors and alignment
//! bias, convexity of `g_p`, Monte Carlo bound checks, early-phase dynamics
//! and alignment reports of trained networks.

mod bounds;
mod convexity;
mod dynamics;
mod extremal;
mod report;

pub use bounds::{mc_bound_check, wilson_interval, BoundCheck, BoundEvent, Expectation, MIN_SAMPLES};
pub use convexity::{gp, gp_argmin, gp_second_derivative};
pub use dynamics::{
    drift_scaling, small_norm_phase, small_norm_phase_in, DriftScaling, SmallNormReport, SmallNormSpec,
};
pub use extremal::{
    alignment_bias_sweep, alignment_derivative, delta_for_zeta, extremal_vector, lambda_check, rotation_field,
    ExtremalField, LambdaCheck, NeuronSign, SweepSummary, SweepTarget, KINK_TOL,
};
pub use report::{alignment_report, AlignmentReport};
