//! Two-proportion z-test of the null "both groups have equal acceptance
//! probability", plus the Pearson chi-square cross-check.

use serde::Serialize;

use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::kernels::{phi, quantile_unchecked, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sidedness {
    /// Reject for disparity in either direction.
    #[serde(rename = "two-sided")]
    TwoSided,
    /// Alternative: the protected group's rate is lower (disparity > 0).
    #[serde(rename = "one-sided-protected-lower")]
    ProtectedLower,
    /// Alternative: the protected group's rate is higher (disparity < 0).
    #[serde(rename = "one-sided-protected-higher")]
    ProtectedHigher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceEstimator {
    Pooled,
    Unpooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestConfig {
    pub alpha: Probability,
    pub sidedness: Sidedness,
    pub variance: VarianceEstimator,
}

impl TestConfig {
    pub fn new(alpha: f64, sidedness: Sidedness, variance: VarianceEstimator) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self { alpha: Probability::saturating(alpha), sidedness, variance })
    }

    /// Pooled two-sided defaults at the given significance level.
    pub fn pooled_two_sided(alpha: f64) -> Result<Self> {
        Self::new(alpha, Sidedness::TwoSided, VarianceEstimator::Pooled)
    }

    /// Same test at a different significance level (Bonferroni splits).
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.sidedness, self.variance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub z: f64,
    pub p_value: Probability,
    pub critical_value: f64,
    pub reject: bool,
    pub standard_error: f64,
    pub observed_disparity: f64,
}

/// Runs the two-proportion z-test on the designated groups of `table`.
///
/// A table where the standard error vanishes (all outcomes identical) yields
/// a degenerate-variance error: the test is undefined there, which is not the
/// same as "no violation".
pub fn z_test(table: &CohortTable, config: &TestConfig) -> Result<TestResult> {
    let r = table.reference();
    let p = table.protected();
    z_test_counts(r.n, r.k, p.n, p.k, config)
}

pub(crate) fn z_test_counts(
    n_ref: u64,
    k_ref: u64,
    n_prot: u64,
    k_prot: u64,
    config: &TestConfig,
) -> Result<TestResult> {
    let se = standard_error(n_ref, k_ref, n_prot, k_prot, config.variance)
        .ok_or(Error::DegenerateVariance)?;
    let disparity = k_ref as f64 / n_ref as f64 - k_prot as f64 / n_prot as f64;
    let z = disparity / se;
    let alpha = config.alpha.value();
    let p_value = p_value_from_z(z, config.sidedness);
    let critical_value = match config.sidedness {
        Sidedness::TwoSided => quantile_unchecked(1.0 - alpha / 2.0),
        Sidedness::ProtectedLower => quantile_unchecked(1.0 - alpha),
        Sidedness::ProtectedHigher => -quantile_unchecked(1.0 - alpha),
    };
    Ok(TestResult {
        z,
        p_value: Probability::saturating(p_value),
        critical_value,
        // Strict inequality: conservative on the type-1 side and required for
        // exact-enumeration reproducibility.
        reject: p_value < alpha,
        standard_error: se,
        observed_disparity: disparity,
    })
}

pub(crate) fn p_value_from_z(z: f64, sidedness: Sidedness) -> f64 {
    match sidedness {
        Sidedness::TwoSided => (2.0 * (1.0 - phi(z.abs()))).min(1.0),
        Sidedness::ProtectedLower => 1.0 - phi(z),
        Sidedness::ProtectedHigher => phi(z),
    }
}

// None when the estimator is zero (test undefined).
pub(crate) fn standard_error(
    n_ref: u64,
    k_ref: u64,
    n_prot: u64,
    k_prot: u64,
    variance: VarianceEstimator,
) -> Option<f64> {
    let nr = n_ref as f64;
    let np = n_prot as f64;
    let se = match variance {
        VarianceEstimator::Pooled => {
            let pooled = (k_ref + k_prot) as f64 / (nr + np);
            (pooled * (1.0 - pooled) * (1.0 / nr + 1.0 / np)).sqrt()
        }
        VarianceEstimator::Unpooled => {
            let pr = k_ref as f64 / nr;
            let pp = k_prot as f64 / np;
            (pr * (1.0 - pr) / nr + pp * (1.0 - pp) / np).sqrt()
        }
    };
    (se > 0.0).then_some(se)
}

/// Rejection decision only, for enumeration and Monte Carlo loops. Mirrors
/// `z_test` exactly: same standard error, p-value, and strict inequality.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RejectionRule {
    alpha: f64,
    sidedness: Sidedness,
    variance: VarianceEstimator,
}

impl RejectionRule {
    pub(crate) fn new(config: &TestConfig) -> Self {
        Self {
            alpha: config.alpha.value(),
            sidedness: config.sidedness,
            variance: config.variance,
        }
    }

    /// None when the table is degenerate and the test cannot run.
    pub(crate) fn rejects(&self, n_ref: u64, k_ref: u64, n_prot: u64, k_prot: u64) -> Option<bool> {
        let se = standard_error(n_ref, k_ref, n_prot, k_prot, self.variance)?;
        let z = (k_ref as f64 / n_ref as f64 - k_prot as f64 / n_prot as f64) / se;
        Some(p_value_from_z(z, self.sidedness) < self.alpha)
    }
}

/// Pearson chi-square statistic of the 2x2 group-by-outcome table, no
/// continuity correction. Equals z^2 of the pooled test.
pub fn chi_square_statistic(table: &CohortTable) -> Result<f64> {
    let r = table.reference();
    let p = table.protected();
    let (a, b) = (r.k as f64, (r.n - r.k) as f64);
    let (c, d) = (p.k as f64, (p.n - p.k) as f64);
    let total = a + b + c + d;
    let col_pos = a + c;
    let col_neg = b + d;
    if col_pos == 0.0 || col_neg == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let det = a * d - b * c;
    Ok(total * det * det / ((a + b) * (c + d) * col_pos * col_neg))
}
