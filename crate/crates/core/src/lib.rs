//! Nonparametric estimation of a latent-variable distribution and a
//! measurement-error distribution from two order statistics of repeated
//! measurements `X_j = ξ + ε_j`, `j = 1..n`.
//!
//! * [`orderstat`]: exact CDFs of order statistics and parent recovery.
//! * [`sieve`]: squared-Legendre sieve CDFs over a base distribution.
//! * [`estimator`]: the simulated ch.f.-matching sieve estimator.
//! * [`diagnostics`]: Rossberg's distribution, spacing/cross-sum and
//!   ch.f.-ratio checks.
//! * [`study`]: run configuration and the Monte Carlo harness.

pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod format;
pub mod numeric;
pub mod optim;
pub mod orderstat;
pub mod rng;
pub mod sieve;
pub mod study;

pub use diagnostics::{DistanceReport, Rossberg};
pub use error::{Error, Result};
pub use estimator::{
    criterion, empirical_chf, estimate, q_kernel, simulate_sample, CriterionConfig,
    EstimateResult, ObservedSample, OptimizerSettings, SimPanel,
};
pub use orderstat::{OrderStatDesign, ParentCdf};
pub use sieve::{BaseCdf, SieveCdf};
pub use study::RunConfig;
