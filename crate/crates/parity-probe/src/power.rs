//! Type-2 error machinery: analytic beta under the normal approximation,
//! Monte Carlo beta, exact enumeration for small cohorts, inverse solvers,
//! figure-style sweeps, and synthetic cohort generation.

use rayon::prelude::*;
use serde::Serialize;

use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::kernels::{binomial_sample, log_binomial_coefficient, phi, quantile_unchecked, Probability, RandomSource};
use crate::ztest::{RejectionRule, Sidedness, TestConfig};

/// Hypothesized true rates and group sizes, the alternative a power value is
/// computed against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerQuery {
    pub p_ref: Probability,
    pub p_prot: Probability,
    pub n_ref: u64,
    pub n_prot: u64,
    pub config: TestConfig,
}

impl PowerQuery {
    pub fn new(
        p_ref: Probability,
        p_prot: Probability,
        n_ref: u64,
        n_prot: u64,
        config: TestConfig,
    ) -> Result<Self> {
        if n_ref == 0 || n_prot == 0 {
            return Err(Error::EmptyGroup);
        }
        Ok(Self { p_ref, p_prot, n_ref, n_prot, config })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PowerMethod {
    #[serde(rename = "analytic")]
    Analytic,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
    #[serde(rename = "exact")]
    Exact,
}

impl PowerMethod {
    pub fn label(&self) -> &'static str {
        match self {
            PowerMethod::Analytic => "analytic",
            PowerMethod::MonteCarlo => "monte-carlo",
            PowerMethod::Exact => "exact",
        }
    }
}

/// A type-2 error estimate with its method tag and, for Monte Carlo, its
/// sampling uncertainty and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub beta: Probability,
    pub method: PowerMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PowerEstimate {
    pub fn power(&self) -> f64 {
        1.0 - self.beta.value()
    }

    fn plain(beta: f64, method: PowerMethod) -> Self {
        Self {
            beta: Probability::saturating(beta),
            method,
            replicates: None,
            std_error: None,
            seed: None,
        }
    }
}

fn open_rate(p: Probability) -> Result<f64> {
    let v = p.value();
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::RateNotInOpenInterval(v))
    }
}

/// Type-2 error under the two-proportion normal approximation, with the
/// pooled null standard error inside the critical region and the alternative
/// (unpooled) standard error for the test statistic's distribution. Both tail
/// terms are retained for two-sided tests, so the null query gives back
/// power = alpha exactly.
pub fn analytic_beta(query: &PowerQuery) -> Result<PowerEstimate> {
    let p_ref = open_rate(query.p_ref)?;
    let p_prot = open_rate(query.p_prot)?;
    if query.n_ref == 0 || query.n_prot == 0 {
        return Err(Error::EmptyGroup);
    }
    let nr = query.n_ref as f64;
    let np = query.n_prot as f64;
    let delta = p_ref - p_prot;
    let pooled = (nr * p_ref + np * p_prot) / (nr + np);
    let se0 = (pooled * (1.0 - pooled) * (1.0 / nr + 1.0 / np)).sqrt();
    let se1 = (p_ref * (1.0 - p_ref) / nr + p_prot * (1.0 - p_prot) / np).sqrt();
    let alpha = query.config.alpha.value();
    let power = match query.config.sidedness {
        Sidedness::TwoSided => {
            let zc = quantile_unchecked(1.0 - alpha / 2.0);
            phi((delta - zc * se0) / se1) + phi((-delta - zc * se0) / se1)
        }
        Sidedness::ProtectedLower => {
            let zc = quantile_unchecked(1.0 - alpha);
            phi((delta - zc * se0) / se1)
        }
        Sidedness::ProtectedHigher => {
            let zc = quantile_unchecked(1.0 - alpha);
            phi((-delta - zc * se0) / se1)
        }
    };
    Ok(PowerEstimate::plain(1.0 - power, PowerMethod::Analytic))
}

/// Empirical non-rejection frequency over simulated cohorts. Degenerate
/// replicates (the test cannot run) count as non-rejections: a test that
/// cannot run has not detected a violation.
///
/// Replicates are distributed across threads but each draws from its own
/// counter-derived substream, so the result is identical to sequential
/// execution for a given seed.
pub fn monte_carlo_beta(
    query: &PowerQuery,
    replicates: u64,
    source: &RandomSource,
) -> Result<PowerEstimate> {
    if replicates < 1000 {
        return Err(Error::TooFewReplicates(replicates));
    }
    if query.n_ref == 0 || query.n_prot == 0 {
        return Err(Error::EmptyGroup);
    }
    let rule = RejectionRule::new(&query.config);
    let non_rejections: u64 = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let sub = source.substream(i);
            let k_ref = binomial_sample(query.n_ref, query.p_ref, &sub.substream(0));
            let k_prot = binomial_sample(query.n_prot, query.p_prot, &sub.substream(1));
            match rule.rejects(query.n_ref, k_ref, query.n_prot, k_prot) {
                Some(true) => 0u64,
                Some(false) | None => 1u64,
            }
        })
        .sum();
    let beta = non_rejections as f64 / replicates as f64;
    Ok(PowerEstimate {
        beta: Probability::saturating(beta),
        method: PowerMethod::MonteCarlo,
        replicates: Some(replicates),
        std_error: Some((beta * (1.0 - beta) / replicates as f64).sqrt()),
        seed: Some(source.seed()),
    })
}

const EXACT_LIMIT: u64 = 500;

/// Exact type-2 error by enumerating every (k_ref, k_prot) outcome pair and
/// summing the product binomial probabilities of those the test does not
/// reject (degenerate outcomes included). Compensated summation keeps the
/// quarter-million-term sum stable.
pub fn exact_beta(query: &PowerQuery) -> Result<PowerEstimate> {
    for n in [query.n_ref, query.n_prot] {
        if n == 0 {
            return Err(Error::EmptyGroup);
        }
        if n > EXACT_LIMIT {
            return Err(Error::ExactSizeGuard { n, limit: EXACT_LIMIT });
        }
    }
    let pmf_ref = binomial_pmf(query.n_ref, query.p_ref.value());
    let pmf_prot = binomial_pmf(query.n_prot, query.p_prot.value());
    let rule = RejectionRule::new(&query.config);

    let mut total = KahanSum::default();
    for (k_ref, &pr) in pmf_ref.iter().enumerate() {
        if pr == 0.0 {
            continue;
        }
        let mut row = KahanSum::default();
        for (k_prot, &pp) in pmf_prot.iter().enumerate() {
            let reject = rule
                .rejects(query.n_ref, k_ref as u64, query.n_prot, k_prot as u64)
                .unwrap_or(false);
            if !reject {
                row.add(pp);
            }
        }
        total.add(pr * row.value());
    }
    Ok(PowerEstimate::plain(total.value(), PowerMethod::Exact))
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let size = (n + 1) as usize;
    if p == 0.0 {
        let mut v = vec![0.0; size];
        v[0] = 1.0;
        return v;
    }
    if p == 1.0 {
        let mut v = vec![0.0; size];
        v[size - 1] = 1.0;
        return v;
    }
    let lp = p.ln();
    let lq = (1.0 - p).ln();
    (0..=n)
        .map(|k| {
            let lc = log_binomial_coefficient(n, k).expect("k <= n");
            (lc + k as f64 * lp + (n - k) as f64 * lq).exp()
        })
        .collect()
}

#[derive(Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, term: f64) {
        let y = term - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Smallest total sample size whose analytic type-2 error meets the target,
/// split per `allocation_ratio` = n_ref : n_prot with each group rounded up.
pub fn min_sample_size(
    p_ref: Probability,
    p_prot: Probability,
    target_beta: Probability,
    allocation_ratio: f64,
    config: &TestConfig,
) -> Result<u64> {
    let pr = open_rate(p_ref)?;
    let pp = open_rate(p_prot)?;
    if pr == pp {
        return Err(Error::UnreachableTarget { target: target_beta.value() });
    }
    if !(allocation_ratio.is_finite() && allocation_ratio > 0.0) {
        return Err(Error::InvalidAllocationRatio(allocation_ratio));
    }
    let target = target_beta.value();
    let alpha = config.alpha.value();
    if !(target > 0.0 && target < 1.0 - alpha) {
        return Err(Error::UnreachableTarget { target });
    }

    let beta_at = |prot_n: u64| -> f64 {
        let (n_ref, n_prot) = split(prot_n, allocation_ratio);
        let query = PowerQuery { p_ref, p_prot, n_ref, n_prot, config: *config };
        analytic_beta(&query).expect("rates validated").beta.value()
    };

    // bracket by doubling, then bisect on the protected-group count
    let mut hi = 1u64;
    while beta_at(hi) > target {
        hi = hi.checked_mul(2).ok_or(Error::UnreachableTarget { target })?;
    }
    let mut lo = hi / 2; // beta(lo) > target, or lo == 0
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if beta_at(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // integer rounding can make beta locally non-monotone; settle on the
    // smallest count that meets the target
    while hi > 1 && beta_at(hi - 1) <= target {
        hi -= 1;
    }
    let (n_ref, n_prot) = split(hi, allocation_ratio);
    Ok(n_ref + n_prot)
}

fn split(prot_n: u64, allocation_ratio: f64) -> (u64, u64) {
    let n_ref = ((prot_n as f64) * allocation_ratio).ceil() as u64;
    (n_ref.max(1), prot_n)
}

/// Smallest disparity delta > 0 with analytic_beta(base_rate, base_rate - delta)
/// at or below the target, found by bisection to 1e-6 absolute.
pub fn min_detectable_disparity(
    base_rate: Probability,
    n_ref: u64,
    n_prot: u64,
    target_beta: Probability,
    config: &TestConfig,
) -> Result<f64> {
    let base = open_rate(base_rate)?;
    if n_ref == 0 || n_prot == 0 {
        return Err(Error::EmptyGroup);
    }
    let target = target_beta.value();
    let alpha = config.alpha.value();
    if !(target > 0.0 && target < 1.0 - alpha) {
        return Err(Error::UnreachableTarget { target });
    }
    let beta_at = |delta: f64| -> f64 {
        let query = PowerQuery {
            p_ref: base_rate,
            p_prot: Probability::saturating(base - delta),
            n_ref,
            n_prot,
            config: *config,
        };
        analytic_beta(&query).expect("rates in the open interval").beta.value()
    };
    let mut hi = base * (1.0 - 1e-9);
    if beta_at(hi) > target {
        return Err(Error::NoDetectableDisparity { base_rate: base });
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if beta_at(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    /// Grid values are total sample sizes, split by the allocation ratio.
    #[serde(rename = "total-sample-size")]
    TotalSampleSize,
    /// Grid values are protected-group acceptance rates.
    #[serde(rename = "protected-rate")]
    ProtectedRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSettings {
    pub replicates: u64,
    pub source: RandomSource,
}

/// Grid definition for a figure-style beta curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub p_ref: Probability,
    /// Fixed protected rate; replaced pointwise when the axis is the rate.
    pub p_prot: Probability,
    /// Fixed group sizes; replaced pointwise when the axis is the sample size.
    pub n_ref: u64,
    pub n_prot: u64,
    /// n_ref : n_prot when resolving total sample sizes.
    pub allocation_ratio: f64,
    pub config: TestConfig,
    pub method: PowerMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McSettings>,
}

/// One resolved grid point and its beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub n_ref: u64,
    pub n_prot: u64,
    pub p_ref: f64,
    pub p_prot: f64,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub variance: crate::ztest::VarianceEstimator,
    pub method: PowerMethod,
    pub beta: f64,
}

/// Evaluates beta at every grid point with the spec's method. Rows come back
/// in grid order and each equals the corresponding direct call.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.grid.is_empty() || spec.grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid);
    }
    if !(spec.allocation_ratio.is_finite() && spec.allocation_ratio > 0.0) {
        return Err(Error::InvalidAllocationRatio(spec.allocation_ratio));
    }
    spec.grid
        .iter()
        .enumerate()
        .map(|(idx, &axis_value)| {
            let (n_ref, n_prot, p_prot) = match spec.axis {
                SweepAxis::TotalSampleSize => {
                    let total = axis_value.round() as u64;
                    let r = spec.allocation_ratio;
                    let n_ref = ((total as f64) * r / (1.0 + r)).ceil() as u64;
                    let n_prot = total.checked_sub(n_ref).filter(|&n| n > 0).ok_or(Error::EmptyGroup)?;
                    (n_ref.max(1), n_prot, spec.p_prot)
                }
                SweepAxis::ProtectedRate => {
                    (spec.n_ref, spec.n_prot, Probability::new(axis_value)?)
                }
            };
            let query = PowerQuery::new(spec.p_ref, p_prot, n_ref, n_prot, spec.config)?;
            let estimate = match spec.method {
                PowerMethod::Analytic => analytic_beta(&query)?,
                PowerMethod::Exact => exact_beta(&query)?,
                PowerMethod::MonteCarlo => {
                    let mc = spec
                        .monte_carlo
                        .ok_or(Error::TooFewReplicates(0))?;
                    monte_carlo_beta(&query, mc.replicates, &mc.source.substream(idx as u64))?
                }
            };
            Ok(SweepRow {
                axis: spec.axis,
                axis_value,
                n_ref,
                n_prot,
                p_ref: spec.p_ref.value(),
                p_prot: p_prot.value(),
                alpha: spec.config.alpha.value(),
                sidedness: spec.config.sidedness,
                variance: spec.config.variance,
                method: spec.method,
                beta: estimate.beta.value(),
            })
        })
        .collect()
}

/// Analytic betas for two rate pairs that share the same disparity, at
/// identical group sizes. Isolates the base-rate sensitivity of the test.
pub fn fixed_disparity_comparison(
    delta: f64,
    high_rates: (Probability, Probability),
    low_rates: (Probability, Probability),
    n_ref: u64,
    n_prot: u64,
    config: &TestConfig,
) -> Result<(PowerEstimate, PowerEstimate)> {
    for (a, b) in [high_rates, low_rates] {
        if (a.value() - b.value() - delta).abs() > 1e-12 {
            return Err(Error::DisparityMismatch(a.value(), b.value(), delta));
        }
    }
    let query = |rates: (Probability, Probability)| {
        PowerQuery::new(rates.0, rates.1, n_ref, n_prot, *config)
    };
    Ok((analytic_beta(&query(high_rates)?)?, analytic_beta(&query(low_rates)?)?))
}

/// Labels used by `generate_cohort` for the two synthetic groups.
pub const SYNTHETIC_REFERENCE: &str = "reference";
pub const SYNTHETIC_PROTECTED: &str = "protected";

/// Draws one synthetic two-group cohort; each group's count comes from its
/// own substream, so the table is a pure function of the source.
pub fn generate_cohort(
    p_ref: Probability,
    p_prot: Probability,
    n_ref: u64,
    n_prot: u64,
    source: &RandomSource,
) -> Result<CohortTable> {
    if n_ref == 0 || n_prot == 0 {
        return Err(Error::EmptyGroup);
    }
    let k_ref = binomial_sample(n_ref, p_ref, &source.substream(0));
    let k_prot = binomial_sample(n_prot, p_prot, &source.substream(1));
    CohortTable::two_groups((SYNTHETIC_REFERENCE, n_ref, k_ref), (SYNTHETIC_PROTECTED, n_prot, k_prot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn query(p_ref: f64, p_prot: f64, n_ref: u64, n_prot: u64, alpha: f64) -> PowerQuery {
        PowerQuery::new(
            prob(p_ref),
            prob(p_prot),
            n_ref,
            n_prot,
            TestConfig::pooled_two_sided(alpha).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn analytic_null_beta_is_one_minus_alpha() {
        for &alpha in &[0.01, 0.05, 0.1] {
            let q = query(0.4, 0.4, 777, 333, alpha);
            let beta = analytic_beta(&q).unwrap().beta.value();
            assert!((beta - (1.0 - alpha)).abs() <= 1e-9, "alpha={alpha} beta={beta}");
        }
    }

    #[test]
    fn analytic_appendix_anchors() {
        let b1 = analytic_beta(&query(0.8, 0.75, 1250, 1250, 0.01)).unwrap().beta.value();
        assert!((b1 - 0.337_848_242_830_31).abs() <= 1e-9);
        let b2 = analytic_beta(&query(0.8, 0.75, 2500, 2500, 0.01)).unwrap().beta.value();
        assert!((b2 - 0.048_408_288_937_53).abs() <= 1e-9);
    }

    #[test]
    fn analytic_rejects_boundary_rates() {
        let cfg = TestConfig::pooled_two_sided(0.05).unwrap();
        let q = PowerQuery::new(prob(1.0), prob(0.5), 10, 10, cfg).unwrap();
        assert!(matches!(analytic_beta(&q), Err(Error::RateNotInOpenInterval(_))));
    }

    #[test]
    fn monte_carlo_null_rejection_rate() {
        let q = query(0.5, 0.5, 1000, 1000, 0.05);
        let src = RandomSource::new(2024);
        let est = monte_carlo_beta(&q, 100_000, &src).unwrap();
        assert!((est.beta.value() - 0.95).abs() <= 0.01);
        assert_eq!(est.replicates, Some(100_000));
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let q = query(0.6, 0.5, 200, 200, 0.05);
        let src = RandomSource::with_stream(5, 1);
        let a = monte_carlo_beta(&q, 10_000, &src).unwrap();
        let b = monte_carlo_beta(&q, 10_000, &src).unwrap();
        assert_eq!(a.beta.value().to_bits(), b.beta.value().to_bits());
    }

    #[test]
    fn monte_carlo_replicate_floor() {
        let q = query(0.6, 0.5, 100, 100, 0.05);
        assert!(matches!(
            monte_carlo_beta(&q, 999, &RandomSource::new(0)),
            Err(Error::TooFewReplicates(999))
        ));
    }

    #[test]
    fn exact_single_deterministic_outcome() {
        // n = 1 each, p_ref = 1, p_prot = 0: the only outcome is (1, 0),
        // pooled z = sqrt(2) with p = 0.157 > alpha, so the test never rejects.
        let cfg = TestConfig::pooled_two_sided(0.05).unwrap();
        let q = PowerQuery::new(prob(1.0), prob(0.0), 1, 1, cfg).unwrap();
        assert_eq!(exact_beta(&q).unwrap().beta.value(), 1.0);
    }

    #[test]
    fn exact_null_is_conservative() {
        for &n in &[100u64, 200] {
            let q = query(0.5, 0.5, n, n, 0.05);
            let beta = exact_beta(&q).unwrap().beta.value();
            assert!(beta <= 1.0 + 1e-12);
            assert!(beta >= 1.0 - 0.05 - 0.02, "n={n} beta={beta}");
        }
    }

    #[test]
    fn exact_size_guard() {
        let q = query(0.5, 0.4, 501, 100, 0.05);
        assert!(matches!(exact_beta(&q), Err(Error::ExactSizeGuard { .. })));
    }

    #[test]
    fn exact_agrees_with_monte_carlo() {
        let q = query(0.8, 0.6, 200, 200, 0.05);
        let exact = exact_beta(&q).unwrap().beta.value();
        let mc = monte_carlo_beta(&q, 200_000, &RandomSource::new(31)).unwrap();
        let se = mc.std_error.unwrap().max(1e-4);
        assert!(
            (mc.beta.value() - exact).abs() <= 3.0 * se,
            "exact={exact} mc={}",
            mc.beta.value()
        );
    }

    #[test]
    fn min_sample_size_appendix_anchor() {
        let cfg = TestConfig::pooled_two_sided(0.01).unwrap();
        let total =
            min_sample_size(prob(0.8), prob(0.75), prob(0.05), 1.0, &cfg).unwrap();
        assert_eq!(total, 4964); // 2482 per group
    }

    #[test]
    fn min_sample_size_inverse_consistency() {
        let cfg = TestConfig::pooled_two_sided(0.01).unwrap();
        let total = min_sample_size(prob(0.8), prob(0.75), prob(0.05), 1.0, &cfg).unwrap();
        let per_group = total / 2;
        let at = |n: u64| analytic_beta(&query(0.8, 0.75, n, n, 0.01)).unwrap().beta.value();
        assert!(at(per_group) <= 0.05);
        assert!(at(per_group - 1) > 0.05);
    }

    #[test]
    fn min_sample_size_terminates_near_unreachable_target() {
        let cfg = TestConfig::pooled_two_sided(0.05).unwrap();
        let target = prob(0.999 * 0.95);
        let total = min_sample_size(prob(0.5), prob(0.499), target, 1.0, &cfg).unwrap();
        assert!(total >= 2);
    }

    #[test]
    fn min_sample_size_error_cases() {
        let cfg = TestConfig::pooled_two_sided(0.05).unwrap();
        assert!(min_sample_size(prob(0.5), prob(0.5), prob(0.2), 1.0, &cfg).is_err());
        assert!(min_sample_size(prob(0.5), prob(0.4), prob(0.96), 1.0, &cfg).is_err());
    }

    #[test]
    fn mde_inverse_of_appendix_anchor() {
        let cfg = TestConfig::pooled_two_sided(0.01).unwrap();
        let delta =
            min_detectable_disparity(prob(0.8), 1250, 1250, prob(0.338), &cfg).unwrap();
        assert!((delta - 0.05).abs() <= 1e-3, "delta={delta}");
    }

    #[test]
    fn mde_shrinks_with_sample_size() {
        let cfg = TestConfig::pooled_two_sided(0.01).unwrap();
        let d1 = min_detectable_disparity(prob(0.8), 500, 500, prob(0.2), &cfg).unwrap();
        let d4 = min_detectable_disparity(prob(0.8), 2000, 2000, prob(0.2), &cfg).unwrap();
        assert!(d4 < d1);
    }

    #[test]
    fn mde_unreachable_target() {
        let cfg = TestConfig::pooled_two_sided(0.05).unwrap();
        assert!(min_detectable_disparity(prob(0.8), 100, 100, prob(0.96), &cfg).is_err());
    }

    fn analytic_sweep(axis: SweepAxis, grid: Vec<f64>) -> SweepSpec {
        SweepSpec {
            axis,
            grid,
            p_ref: prob(0.8),
            p_prot: prob(0.75),
            n_ref: 1250,
            n_prot: 1250,
            allocation_ratio: 1.0,
            config: TestConfig::pooled_two_sided(0.01).unwrap(),
            method: PowerMethod::Analytic,
            monte_carlo: None,
        }
    }

    #[test]
    fn sweep_disparity_direction() {
        // larger disparity (smaller protected rate) means smaller beta
        let rows = sweep(&analytic_sweep(SweepAxis::ProtectedRate, vec![0.70, 0.75])).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].beta < rows[1].beta);
    }

    #[test]
    fn sweep_sample_size_direction() {
        let rows =
            sweep(&analytic_sweep(SweepAxis::TotalSampleSize, vec![2500.0, 5000.0])).unwrap();
        assert_eq!(rows[0].n_ref, 1250);
        assert_eq!(rows[0].n_prot, 1250);
        assert!(rows[1].beta < rows[0].beta);
    }

    #[test]
    fn sweep_single_point_matches_direct_call() {
        let rows = sweep(&analytic_sweep(SweepAxis::ProtectedRate, vec![0.75])).unwrap();
        let direct = analytic_beta(&query(0.8, 0.75, 1250, 1250, 0.01)).unwrap();
        assert_eq!(rows[0].beta.to_bits(), direct.beta.value().to_bits());
    }

    #[test]
    fn sweep_rejects_bad_grid() {
        assert!(matches!(
            sweep(&analytic_sweep(SweepAxis::ProtectedRate, vec![])),
            Err(Error::InvalidGrid)
        ));
        assert!(matches!(
            sweep(&analytic_sweep(SweepAxis::ProtectedRate, vec![0.75, 0.70])),
            Err(Error::InvalidGrid)
        ));
    }

    #[test]
    fn fixed_disparity_base_rate_sensitivity() {
        let cfg = TestConfig::pooled_two_sided(0.01).unwrap();
        let (hi, lo) = fixed_disparity_comparison(
            0.1,
            (prob(0.5), prob(0.4)),
            (prob(0.4), prob(0.3)),
            1000,
            1000,
            &cfg,
        )
        .unwrap();
        let diff = hi.beta.value() - lo.beta.value();
        assert!((diff - 0.010_052_811_3).abs() <= 1e-6, "diff={diff}");
    }

    #[test]
    fn fixed_disparity_imbalance_amplifies() {
        let cfg = TestConfig::pooled_two_sided(0.01).unwrap();
        let (hi, lo) = fixed_disparity_comparison(
            0.1,
            (prob(0.5), prob(0.4)),
            (prob(0.4), prob(0.3)),
            1800,
            200,
            &cfg,
        )
        .unwrap();
        let diff = hi.beta.value() - lo.beta.value();
        assert!((diff - 0.029_518_317_7).abs() <= 1e-6, "diff={diff}");
    }

    #[test]
    fn fixed_disparity_identical_pairs() {
        let cfg = TestConfig::pooled_two_sided(0.05).unwrap();
        let (a, b) = fixed_disparity_comparison(
            0.1,
            (prob(0.5), prob(0.4)),
            (prob(0.5), prob(0.4)),
            500,
            500,
            &cfg,
        )
        .unwrap();
        assert_eq!(a.beta.value(), b.beta.value());
    }

    #[test]
    fn fixed_disparity_mismatch_rejected() {
        let cfg = TestConfig::pooled_two_sided(0.05).unwrap();
        assert!(matches!(
            fixed_disparity_comparison(
                0.1,
                (prob(0.5), prob(0.45)),
                (prob(0.4), prob(0.3)),
                500,
                500,
                &cfg
            ),
            Err(Error::DisparityMismatch(..))
        ));
    }

    #[test]
    fn generate_cohort_certain_acceptance() {
        let t = generate_cohort(prob(1.0), prob(1.0), 20, 10, &RandomSource::new(1)).unwrap();
        assert_eq!(t.reference().k, 20);
        assert_eq!(t.protected().k, 10);
    }

    #[test]
    fn generate_cohort_deterministic() {
        let src = RandomSource::with_stream(9, 3);
        let a = generate_cohort(prob(0.4), prob(0.3), 500, 500, &src).unwrap();
        let b = generate_cohort(prob(0.4), prob(0.3), 500, 500, &src).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_cohort_concentrates() {
        let n = 1_000_000u64;
        let t = generate_cohort(prob(0.35), prob(0.35), n, 10, &RandomSource::new(8)).unwrap();
        let rate = t.reference().k as f64 / n as f64;
        assert!((rate - 0.35).abs() <= 3.0 * (0.35f64 * 0.65 / n as f64).sqrt());
    }

    #[test]
    fn beta_monotone_in_scaled_sample_size() {
        for &(pr, pp) in &[(0.8, 0.75), (0.5, 0.4), (0.3, 0.2), (0.9, 0.6)] {
            let mut last = f64::INFINITY;
            for m in [1u64, 2, 4, 8] {
                let beta =
                    analytic_beta(&query(pr, pp, 300 * m, 300 * m, 0.05)).unwrap().beta.value();
                assert!(beta <= last + 1e-12, "rates=({pr},{pp}) m={m}");
                last = beta;
            }
        }
    }

    #[test]
    fn beta_monotone_in_disparity() {
        let mut last = f64::INFINITY;
        for step in 1..=10 {
            let p_prot = 0.8 - 0.02 * step as f64;
            let beta = analytic_beta(&query(0.8, p_prot, 1250, 1250, 0.01)).unwrap().beta.value();
            assert!(beta <= last + 1e-12, "p_prot={p_prot}");
            last = beta;
        }
    }
}
