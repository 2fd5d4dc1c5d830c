//! Statistical auditing of binary decision data for group-fairness violations.
//!
//! The library measures parity metrics on per-group decision counts, tests the
//! null hypothesis of equal acceptance rates with a two-proportion z-test, and
//! quantifies the evidential strength of a non-rejection through type-2 error
//! analysis (analytic, Monte Carlo, and exact enumeration). The `parity-probe`
//! binary exposes audits, power planning, sweeps, and cohort simulation.

pub mod audit;
pub mod cohort;
pub mod error;
pub mod kernels;
pub mod metrics;
pub mod power;
pub mod ztest;

pub use error::{Error, Result};
pub use kernels::{Probability, RandomSource};
