//! Decision records, their aggregation into per-group sufficient statistics,
//! and CSV ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// One decision about one individual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRecord {
    pub group: String,
    /// true = accepted / hired.
    pub outcome: bool,
    /// Ground-truth label, present only when equalized-odds analysis applies.
    pub truth: Option<bool>,
}

impl DecisionRecord {
    pub fn new(group: impl Into<String>, outcome: bool, truth: Option<bool>) -> Result<Self> {
        let group = group.into();
        if group.is_empty() {
            return Err(Error::Csv("empty group label".into()));
        }
        Ok(Self { group, outcome, truth })
    }
}

/// Per-truth-stratum counts, present when ground-truth labels exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruthStrata {
    /// Records with truth = 1 and how many of them were accepted.
    pub n_pos: u64,
    pub k_pos: u64,
    /// Records with truth = 0 and how many of them were accepted.
    pub n_neg: u64,
    pub k_neg: u64,
}

/// Sufficient statistics for one group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupOutcomeCounts {
    pub group: String,
    pub n: u64,
    pub k: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<TruthStrata>,
}

impl GroupOutcomeCounts {
    pub fn new(group: impl Into<String>, n: u64, k: u64) -> Result<Self> {
        Self::with_strata(group, n, k, None)
    }

    pub fn with_strata(
        group: impl Into<String>,
        n: u64,
        k: u64,
        strata: Option<TruthStrata>,
    ) -> Result<Self> {
        let group = group.into();
        if n == 0 || k > n {
            return Err(Error::InvalidCounts { group, n, k });
        }
        if let Some(s) = strata {
            if s.n_pos + s.n_neg != n || s.k_pos + s.k_neg != k || s.k_pos > s.n_pos || s.k_neg > s.n_neg
            {
                return Err(Error::InconsistentStrata { group });
            }
        }
        Ok(Self { group, n, k, strata })
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// Per-group counts plus the designation of the two groups every two-sample
/// operation compares. The designation is explicit configuration, never
/// inferred from the data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortTable {
    groups: Vec<GroupOutcomeCounts>,
    reference: usize,
    protected: usize,
}

impl CohortTable {
    pub fn new(
        mut groups: Vec<GroupOutcomeCounts>,
        reference: &str,
        protected: &str,
    ) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::TooFewGroups);
        }
        if reference == protected {
            return Err(Error::SameGroups);
        }
        groups.sort_by(|a, b| a.group.cmp(&b.group));
        for pair in groups.windows(2) {
            if pair[0].group == pair[1].group {
                return Err(Error::DuplicateGroup(pair[0].group.clone()));
            }
        }
        let find = |label: &str| {
            groups
                .iter()
                .position(|g| g.group == label)
                .ok_or_else(|| Error::UnknownGroup(label.to_string()))
        };
        let reference = find(reference)?;
        let protected = find(protected)?;
        Ok(Self { groups, reference, protected })
    }

    /// Two-group convenience constructor.
    pub fn two_groups(
        reference: (&str, u64, u64),
        protected: (&str, u64, u64),
    ) -> Result<Self> {
        let groups = vec![
            GroupOutcomeCounts::new(reference.0, reference.1, reference.2)?,
            GroupOutcomeCounts::new(protected.0, protected.1, protected.2)?,
        ];
        Self::new(groups, reference.0, protected.0)
    }

    pub fn groups(&self) -> &[GroupOutcomeCounts] {
        &self.groups
    }

    pub fn reference(&self) -> &GroupOutcomeCounts {
        &self.groups[self.reference]
    }

    pub fn protected(&self) -> &GroupOutcomeCounts {
        &self.groups[self.protected]
    }

    /// Table with reference and protected designations exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            groups: self.groups.clone(),
            reference: self.protected,
            protected: self.reference,
        }
    }

    /// Exact rational-rate equality of the two designated groups:
    /// k_ref / n_ref = k_prot / n_prot by integer cross-multiplication.
    pub fn designated_rates_equal(&self) -> bool {
        let r = self.reference();
        let p = self.protected();
        (r.k as u128) * (p.n as u128) == (p.k as u128) * (r.n as u128)
    }
}

/// Aggregates records into per-group counts, ordered lexicographically by
/// label, with the stated reference/protected designation.
pub fn aggregate(
    records: &[DecisionRecord],
    reference: &str,
    protected: &str,
) -> Result<CohortTable> {
    let mut by_group: BTreeMap<&str, (u64, u64, TruthStrata, bool)> = BTreeMap::new();
    for rec in records {
        let entry = by_group.entry(&rec.group).or_insert((
            0,
            0,
            TruthStrata { n_pos: 0, k_pos: 0, n_neg: 0, k_neg: 0 },
            true,
        ));
        entry.0 += 1;
        entry.1 += rec.outcome as u64;
        match rec.truth {
            Some(true) => {
                entry.2.n_pos += 1;
                entry.2.k_pos += rec.outcome as u64;
            }
            Some(false) => {
                entry.2.n_neg += 1;
                entry.2.k_neg += rec.outcome as u64;
            }
            None => entry.3 = false,
        }
    }
    if by_group.len() < 2 {
        return Err(Error::TooFewGroups);
    }
    let groups = by_group
        .into_iter()
        .map(|(label, (n, k, strata, all_truth))| {
            GroupOutcomeCounts::with_strata(label, n, k, all_truth.then_some(strata))
        })
        .collect::<Result<Vec<_>>>()?;
    CohortTable::new(groups, reference, protected)
}

/// Names of the CSV columns to read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnBindings {
    pub group: String,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
}

/// Reads decision records from a headered CSV file. Rows are never silently
/// skipped; every malformed cell reports its 1-based data row number.
pub fn ingest_csv(path: impl AsRef<Path>, bindings: &ColumnBindings) -> Result<Vec<DecisionRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())
        .map_err(|e| Error::Csv(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let group_idx = col(&bindings.group)?;
    let outcome_idx = col(&bindings.outcome)?;
    let truth_idx = bindings.truth.as_deref().map(col).transpose()?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i as u64 + 1;
        let row = row.map_err(|e| Error::CsvRow { row: row_no, message: e.to_string() })?;
        let cell = |idx: usize, what: &str| {
            row.get(idx).ok_or_else(|| Error::CsvRow {
                row: row_no,
                message: format!("missing {what} cell"),
            })
        };
        let group = cell(group_idx, "group")?;
        if group.is_empty() {
            return Err(Error::CsvRow { row: row_no, message: "empty group cell".into() });
        }
        let outcome = parse_binary(cell(outcome_idx, "outcome")?, "outcome", row_no)?;
        let truth = truth_idx
            .map(|idx| parse_binary(cell(idx, "truth")?, "truth", row_no))
            .transpose()?;
        records.push(DecisionRecord { group: group.to_string(), outcome, truth });
    }
    Ok(records)
}

// Only the literal ASCII characters "0" and "1" are accepted; no coercion.
fn parse_binary(cell: &str, what: &str, row: u64) -> Result<bool> {
    match cell {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::CsvRow {
            row,
            message: format!("{what} value {other:?} is not \"0\" or \"1\""),
        }),
    }
}

/// Writes records in the same CSV dialect `ingest_csv` reads.
pub fn write_csv<W: std::io::Write>(
    out: W,
    records: &[DecisionRecord],
    bindings: &ColumnBindings,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![bindings.group.as_str(), bindings.outcome.as_str()];
    if let Some(truth) = &bindings.truth {
        header.push(truth);
    }
    writer.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    for rec in records {
        let outcome = if rec.outcome { "1" } else { "0" };
        let mut row = vec![rec.group.as_str(), outcome];
        if bindings.truth.is_some() {
            row.push(match rec.truth {
                Some(true) => "1",
                Some(false) => "0",
                None => {
                    return Err(Error::Csv(
                        "record lacks a truth label but a truth column is bound".into(),
                    ))
                }
            });
        }
        writer.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}
