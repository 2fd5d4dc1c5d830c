//! Audit orchestration: ingest, measure, test, and attach a power diagnostic
//! so the report distinguishes "no violation found" from "no violation could
//! have been found".

use std::path::Path;

use serde::Serialize;

use crate::cohort::{aggregate, ingest_csv, CohortTable, ColumnBindings, TruthStrata};
use crate::error::{Error, Result};
use crate::kernels::{Probability, RandomSource};
use crate::metrics::{dp_difference, dp_ratio, eo_gaps, MetricValue};
use crate::power::{analytic_beta, monte_carlo_beta, PowerEstimate, PowerQuery};
use crate::ztest::{z_test, TestConfig, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MetricSelection {
    #[serde(rename = "dp-difference")]
    DpDifference,
    #[serde(rename = "dp-ratio")]
    DpRatio,
    #[serde(rename = "equalized-odds")]
    EqualizedOdds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MonteCarloSettings {
    pub replicates: u64,
    pub seed: u64,
}

/// Full audit configuration. The normative parameters (alpha, the relevant
/// disparity epsilon, and the type-2 error budget) have no defaults anywhere:
/// they are context-dependent judgment calls the caller must make.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditConfig {
    pub columns: ColumnBindings,
    pub reference: String,
    pub protected: String,
    pub metric: MetricSelection,
    pub test: TestConfig,
    /// Smallest disparity considered practically relevant (epsilon).
    pub relevant_disparity: f64,
    /// Largest acceptable probability of missing a disparity of epsilon.
    pub max_type2_error: Probability,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSettings>,
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relevant_disparity > 0.0 && self.relevant_disparity < 1.0) {
            return Err(Error::InvalidEpsilon(self.relevant_disparity));
        }
        if self.reference == self.protected {
            return Err(Error::SameGroups);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "violation_detected")]
    ViolationDetected,
    #[serde(rename = "compliant_adequate_power")]
    CompliantAdequatePower,
    #[serde(rename = "inconclusive_low_power")]
    InconclusiveLowPower,
    #[serde(rename = "inconclusive_degenerate")]
    InconclusiveDegenerate,
}

/// The verdict decision table. A rejection is a finding and takes precedence;
/// a degenerate test otherwise leaves the audit without evidence either way;
/// a non-rejection only supports compliance when every diagnostic shows the
/// audit had adequate power to detect a relevant disparity.
pub fn decide_verdict(any_reject: bool, any_degenerate: bool, all_adequately_powered: bool) -> Verdict {
    if any_reject {
        Verdict::ViolationDetected
    } else if any_degenerate {
        Verdict::InconclusiveDegenerate
    } else if all_adequately_powered {
        Verdict::CompliantAdequatePower
    } else {
        Verdict::InconclusiveLowPower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub n: u64,
    pub k: u64,
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<TruthStrata>,
}

/// One hypothesis test, or the reason it could not run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub name: &'static str,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Type-2 error of detecting a true disparity of epsilon at the observed
/// group sizes and pooled base rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerDiagnostic {
    pub name: &'static str,
    pub epsilon: f64,
    pub p_ref: f64,
    pub p_prot: f64,
    pub n_ref: u64,
    pub n_prot: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<PowerEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub tool_version: &'static str,
    pub generated_at: String,
    pub config: AuditConfig,
    pub groups: Vec<GroupSummary>,
    pub metrics: Vec<MetricValue>,
    pub tests: Vec<TestOutcome>,
    pub power_diagnostics: Vec<PowerDiagnostic>,
    pub verdict: Verdict,
}

impl AuditReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Ingests the file, aggregates it under the configured designation, and
/// builds the full report. Ingestion and configuration errors propagate;
/// degenerate test variance becomes an inconclusive verdict, not a failure.
pub fn run_audit(data: impl AsRef<Path>, config: &AuditConfig) -> Result<AuditReport> {
    config.validate()?;
    let records = ingest_csv(data, &config.columns)?;
    let table = aggregate(&records, &config.reference, &config.protected)?;
    audit_table(&table, config)
}

/// Report construction on an already-aggregated table.
pub fn audit_table(table: &CohortTable, config: &AuditConfig) -> Result<AuditReport> {
    config.validate()?;
    let mut metrics = Vec::new();
    let mut tests = Vec::new();
    let mut diagnostics = Vec::new();

    match config.metric {
        MetricSelection::DpDifference | MetricSelection::DpRatio => {
            metrics.push(if config.metric == MetricSelection::DpDifference {
                dp_difference(table)?
            } else {
                dp_ratio(table)?
            });
            tests.push(run_test("dp-parity", table, &config.test)?);
            let r = table.reference();
            let p = table.protected();
            let pooled = (r.k + p.k) as f64 / (r.n + p.n) as f64;
            diagnostics.extend(diagnose("dp-parity", pooled, r.n, p.n, &config.test, config));
        }
        MetricSelection::EqualizedOdds => {
            let (tpr_gap, fpr_gap) = eo_gaps(table)?;
            metrics.push(tpr_gap);
            metrics.push(fpr_gap);
            // Bonferroni: two stratum tests, each at alpha / 2
            let stratum_config = config.test.with_alpha(config.test.alpha.value() / 2.0)?;
            let r = table.reference().strata.expect("eo_gaps validated strata");
            let p = table.protected().strata.expect("eo_gaps validated strata");
            let ref_label = table.reference().group.as_str();
            let prot_label = table.protected().group.as_str();
            for (name, rn, rk, pn, pk) in [
                ("eo-tpr", r.n_pos, r.k_pos, p.n_pos, p.k_pos),
                ("eo-fpr", r.n_neg, r.k_neg, p.n_neg, p.k_neg),
            ] {
                let stratum =
                    CohortTable::two_groups((ref_label, rn, rk), (prot_label, pn, pk))?;
                tests.push(run_test(name, &stratum, &stratum_config)?);
                let pooled = (rk + pk) as f64 / (rn + pn) as f64;
                diagnostics.extend(diagnose(name, pooled, rn, pn, &stratum_config, config));
            }
        }
    }

    let any_reject = tests.iter().any(|t| t.result.map(|r| r.reject).unwrap_or(false));
    let any_degenerate = tests.iter().any(|t| t.error.is_some());
    let max_beta = config.max_type2_error.value();
    let all_powered = diagnostics.iter().all(|d| {
        d.estimate.map(|e| e.beta.value() <= max_beta).unwrap_or(false)
    });

    Ok(AuditReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        generated_at: chrono::Utc::now().to_rfc3339(),
        config: config.clone(),
        groups: table
            .groups()
            .iter()
            .map(|g| GroupSummary {
                group: g.group.clone(),
                n: g.n,
                k: g.k,
                rate: g.rate(),
                strata: g.strata,
            })
            .collect(),
        metrics,
        tests,
        power_diagnostics: diagnostics,
        verdict: decide_verdict(any_reject, any_degenerate, all_powered),
    })
}

fn run_test(name: &'static str, table: &CohortTable, config: &TestConfig) -> Result<TestOutcome> {
    match z_test(table, config) {
        Ok(result) => Ok(TestOutcome {
            name,
            alpha: config.alpha.value(),
            result: Some(result),
            error: None,
        }),
        Err(Error::DegenerateVariance) => Ok(TestOutcome {
            name,
            alpha: config.alpha.value(),
            result: None,
            error: Some(Error::DegenerateVariance.to_string()),
        }),
        Err(other) => Err(other),
    }
}

// One analytic diagnostic, plus a Monte Carlo one when configured. Both
// enter the compliance gate.
fn diagnose(
    name: &'static str,
    pooled_rate: f64,
    n_ref: u64,
    n_prot: u64,
    test: &TestConfig,
    config: &AuditConfig,
) -> Vec<PowerDiagnostic> {
    let epsilon = config.relevant_disparity;
    let hypothetical_prot = pooled_rate - epsilon;
    let mut diag = PowerDiagnostic {
        name,
        epsilon,
        p_ref: pooled_rate,
        p_prot: hypothetical_prot.max(0.0),
        n_ref,
        n_prot,
        estimate: None,
        note: None,
    };
    if pooled_rate <= 0.0 || pooled_rate >= 1.0 {
        diag.note = Some("pooled rate is degenerate; power undefined".into());
        return vec![diag];
    }
    if hypothetical_prot <= 0.0 {
        diag.note =
            Some("relevant disparity is at least the pooled base rate; power undefined".into());
        return vec![diag];
    }
    let query = PowerQuery {
        p_ref: Probability::saturating(pooled_rate),
        p_prot: Probability::saturating(hypothetical_prot),
        n_ref,
        n_prot,
        config: *test,
    };
    match analytic_beta(&query) {
        Ok(estimate) => diag.estimate = Some(estimate),
        Err(e) => {
            diag.note = Some(e.to_string());
            return vec![diag];
        }
    }
    let mut out = vec![diag.clone()];
    if let Some(mc) = config.monte_carlo {
        let mut mc_diag = diag;
        mc_diag.estimate = None;
        match monte_carlo_beta(&query, mc.replicates, &RandomSource::new(mc.seed)) {
            Ok(est) => mc_diag.estimate = Some(est),
            Err(e) => mc_diag.note = Some(e.to_string()),
        }
        out.push(mc_diag);
    }
    out
}
