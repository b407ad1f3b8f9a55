//! Shallow pReLU networks and the tooling around them.
//!
//! The crate is organised by subsystem:
//!
//! * [`data`]: subclass-cluster distributions, the orthonormal training set,
//!   MNIST IDX ingestion and preprocessing.
//! * [`net`]: the pReLU network `f_p(x) = Σ_j v_j σ(⟨x,w_j⟩)^p / ‖w_j‖^{p-1}`,
//!   analytic gradients, balanced small initialization and training loops.
//! * [`reference`]: the closed-form classifiers `F` and `F^(p)`, their exact
//!   realizations as networks, and a sampled sup-distance estimator.
//! * [`attacks`]: PGD/APGD in several norms, the analytic attack directions and
//!   robust-accuracy evaluation.
//! * [`theory`]: extremal vectors, alignment-bias fields, convexity of `g_p`,
//!   Monte Carlo bound checks and neuron alignment reports.
//! * [`experiments`]: seeded, config-driven pipelines that emit CSV reports.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod data;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod net;
pub mod par;
pub mod reference;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
