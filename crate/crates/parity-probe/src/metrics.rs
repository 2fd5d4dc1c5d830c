//! Point estimates of group fairness metrics on a cohort table.

use serde::Serialize;

use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::kernels::Probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MetricId {
    #[serde(rename = "dp-difference")]
    DpDifference,
    #[serde(rename = "dp-ratio")]
    DpRatio,
    #[serde(rename = "eo-tpr-gap")]
    EoTprGap,
    #[serde(rename = "eo-fpr-gap")]
    EoFprGap,
}

/// A computed metric together with the two group rates it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    pub metric: MetricId,
    pub value: f64,
    pub reference_rate: Probability,
    pub protected_rate: Probability,
}

/// Demographic parity difference: reference rate minus protected rate.
pub fn dp_difference(table: &CohortTable) -> Result<MetricValue> {
    let r = table.reference().rate();
    let p = table.protected().rate();
    Ok(MetricValue {
        metric: MetricId::DpDifference,
        value: r - p,
        reference_rate: Probability::saturating(r),
        protected_rate: Probability::saturating(p),
    })
}

/// Demographic parity ratio: protected rate over reference rate.
pub fn dp_ratio(table: &CohortTable) -> Result<MetricValue> {
    let r = table.reference().rate();
    let p = table.protected().rate();
    if r == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(MetricValue {
        metric: MetricId::DpRatio,
        value: p / r,
        reference_rate: Probability::saturating(r),
        protected_rate: Probability::saturating(p),
    })
}

/// Equalized-odds gaps: (TPR gap, FPR gap), each reference minus protected,
/// computed on the truth = 1 and truth = 0 strata respectively. Signed; the
/// direction of disadvantage is preserved.
pub fn eo_gaps(table: &CohortTable) -> Result<(MetricValue, MetricValue)> {
    let strata_of = |counts: &crate::cohort::GroupOutcomeCounts| {
        counts
            .strata
            .ok_or_else(|| Error::MissingTruth(counts.group.clone()))
    };
    let r = strata_of(table.reference())?;
    let p = strata_of(table.protected())?;
    let check = |n: u64, group: &str, stratum: &'static str| {
        if n == 0 {
            Err(Error::EmptyStratum { group: group.to_string(), stratum })
        } else {
            Ok(())
        }
    };
    let ref_label = &table.reference().group;
    let prot_label = &table.protected().group;
    check(r.n_pos, ref_label, "truth=1")?;
    check(p.n_pos, prot_label, "truth=1")?;
    check(r.n_neg, ref_label, "truth=0")?;
    check(p.n_neg, prot_label, "truth=0")?;

    let tpr_ref = r.k_pos as f64 / r.n_pos as f64;
    let tpr_prot = p.k_pos as f64 / p.n_pos as f64;
    let fpr_ref = r.k_neg as f64 / r.n_neg as f64;
    let fpr_prot = p.k_neg as f64 / p.n_neg as f64;
    Ok((
        MetricValue {
            metric: MetricId::EoTprGap,
            value: tpr_ref - tpr_prot,
            reference_rate: Probability::saturating(tpr_ref),
            protected_rate: Probability::saturating(tpr_prot),
        },
        MetricValue {
            metric: MetricId::EoFprGap,
            value: fpr_ref - fpr_prot,
            reference_rate: Probability::saturating(fpr_ref),
            protected_rate: Probability::saturating(fpr_prot),
        },
    ))
}
