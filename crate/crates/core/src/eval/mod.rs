//! CDC@k and EM@k over a dataset of migration records, grouped by migration
//! type, with a histogram of CDC error classes.

pub mod cdc;
pub mod normalize;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cdc::{cdc_check, classify_error, derive_core_token, CdcReport, ErrorClass};
pub use normalize::{exact_match, normalize};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("record {index} has {found} candidates, {needed} needed")]
    CandidateCountMismatch { index: usize, found: usize, needed: usize },
    #[error("classify_error called on a passing report")]
    ReportPassed,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("k must be positive")]
    InvalidK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MigrationType {
    #[serde(rename = "major→major", alias = "major_to_major", alias = "major-major")]
    MajorToMajor,
    #[serde(rename = "major→minor", alias = "major_to_minor", alias = "major-minor")]
    MajorToMinor,
    #[serde(rename = "minor→major", alias = "minor_to_major", alias = "minor-major")]
    MinorToMajor,
    #[serde(rename = "minor→minor", alias = "minor_to_minor", alias = "minor-minor")]
    MinorToMinor,
}

impl MigrationType {
    pub const ALL: [MigrationType; 4] =
        [MigrationType::MajorToMajor, MigrationType::MajorToMinor, MigrationType::MinorToMajor, MigrationType::MinorToMinor];

    pub fn as_str(self) -> &'static str {
        match self {
            MigrationType::MajorToMajor => "major→major",
            MigrationType::MajorToMinor => "major→minor",
            MigrationType::MinorToMajor => "minor→major",
            MigrationType::MinorToMinor => "minor→minor",
        }
    }

    /// A release is major when every component after the first is zero
    /// (`2`, `2.0`, `2.0.0`).
    pub fn is_major_release(version: &str) -> bool {
        let v = version.trim().trim_start_matches('v');
        v.split('.').skip(1).all(|p| p.chars().all(|c| c == '0'))
    }

    pub fn from_versions(old: &str, new: &str) -> Self {
        match (Self::is_major_release(old), Self::is_major_release(new)) {
            (true, true) => MigrationType::MajorToMajor,
            (true, false) => MigrationType::MajorToMinor,
            (false, true) => MigrationType::MinorToMajor,
            (false, false) => MigrationType::MinorToMinor,
        }
    }
}

impl fmt::Display for MigrationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub old_code: String,
    pub old_version: String,
    pub new_version: String,
    #[serde(default)]
    pub description: String,
    pub reference_code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core_api_token: Option<String>,
    pub migration_type: MigrationType,
}

#[derive(Deserialize)]
struct RawRecord {
    old_code: String,
    old_version: String,
    new_version: String,
    #[serde(default)]
    description: String,
    reference_code: String,
    #[serde(default)]
    core_api_token: Option<String>,
    #[serde(default)]
    migration_type: Option<MigrationType>,
}

impl EvalRecord {
    /// The dataset's token, or one derived from the reference.
    pub fn core_token(&self) -> Result<String, EvalError> {
        match &self.core_api_token {
            Some(t) if !t.trim().is_empty() => Ok(t.trim().to_string()),
            _ => derive_core_token(&self.old_code, &self.reference_code)
                .ok_or_else(|| EvalError::InvalidRecord("no core API token and the reference has no call".into())),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        crate::syntax::parse_module(&self.reference_code)
            .map_err(|e| EvalError::InvalidRecord(format!("reference does not parse: {e}")))?;
        let token = self.core_token()?;
        if !cdc::contains_identifier(&self.reference_code, &token) {
            return Err(EvalError::InvalidRecord(format!("core token '{token}' does not appear in the reference")));
        }
        Ok(())
    }
}

/// Reads JSON Lines records. A missing `migration_type` is inferred from
/// the versions.
pub fn load_records(text: &str) -> Result<Vec<EvalRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| EvalError::Malformed { line: i + 1, message: e.to_string() })?;
        let migration_type =
            raw.migration_type.unwrap_or_else(|| MigrationType::from_versions(&raw.old_version, &raw.new_version));
        out.push(EvalRecord {
            old_code: raw.old_code,
            old_version: raw.old_version,
            new_version: raw.new_version,
            description: raw.description,
            reference_code: raw.reference_code,
            core_api_token: raw.core_api_token,
            migration_type,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateLine {
    pub index: usize,
    pub candidates: Vec<String>,
}

/// Reads `{"index": i, "candidates": [...]}` lines into one list per record.
/// Records without a line get no candidates.
pub fn load_candidates(text: &str, records: usize) -> Result<Vec<Vec<String>>, EvalError> {
    let mut out = vec![Vec::new(); records];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c: CandidateLine =
            serde_json::from_str(line).map_err(|e| EvalError::Malformed { line: i + 1, message: e.to_string() })?;
        let slot = out.get_mut(c.index).ok_or_else(|| EvalError::Malformed {
            line: i + 1,
            message: format!("index {} out of range for {records} records", c.index),
        })?;
        slot.extend(c.candidates);
    }
    Ok(out)
}

/// Per-record outcome at k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub index: usize,
    pub migration_type: MigrationType,
    pub cdc_pass: bool,
    pub em_pass: bool,
    /// Error class of the first candidate when no candidate passes CDC.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_class: Option<ErrorClass>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub records: usize,
    pub cdc_passes: usize,
    pub em_passes: usize,
    pub cdc_at_k: f64,
    pub em_at_k: f64,
    pub errors: BTreeMap<ErrorClass, usize>,
}

impl GroupMetrics {
    fn add(&mut self, o: &RecordOutcome) {
        self.records += 1;
        self.cdc_passes += o.cdc_pass as usize;
        self.em_passes += o.em_pass as usize;
        if let Some(c) = o.error_class {
            *self.errors.entry(c).or_default() += 1;
        }
    }

    fn finish(&mut self) {
        let pct = |n: usize| if self.records == 0 { 0.0 } else { 100.0 * n as f64 / self.records as f64 };
        self.cdc_at_k = pct(self.cdc_passes);
        self.em_at_k = pct(self.em_passes);
    }

    pub fn failures(&self) -> usize {
        self.records - self.cdc_passes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub k: usize,
    pub overall: GroupMetrics,
    pub by_type: BTreeMap<MigrationType, GroupMetrics>,
}

impl MetricsSummary {
    /// One header row and one value row: records, CDC@k and EM@k for each
    /// migration type, then the overall figures.
    pub fn to_csv(&self) -> String {
        let k = self.k;
        let mut header = Vec::new();
        let mut row = Vec::new();
        let mut push = |label: &str, g: Option<&GroupMetrics>| {
            header.push(format!("{label} n"));
            header.push(format!("{label} CDC@{k}"));
            header.push(format!("{label} EM@{k}"));
            match g {
                Some(g) => {
                    row.push(g.records.to_string());
                    row.push(format!("{:.2}", g.cdc_at_k));
                    row.push(format!("{:.2}", g.em_at_k));
                }
                None => row.extend(["0".to_string(), String::new(), String::new()]),
            }
        };
        for t in MigrationType::ALL {
            push(t.as_str(), self.by_type.get(&t));
        }
        push("all", Some(&self.overall));
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}

/// Scores the first `k` candidates of one record.
pub fn evaluate_record(index: usize, record: &EvalRecord, candidates: &[String], k: usize) -> Result<RecordOutcome, EvalError> {
    if candidates.len() < k {
        return Err(EvalError::CandidateCountMismatch { index, found: candidates.len(), needed: k });
    }
    let mut first_error = None;
    let mut cdc_pass = false;
    for (i, c) in candidates[..k].iter().enumerate() {
        let report = cdc_check(c, record)?;
        if i == 0 {
            first_error = report.error_class;
        }
        if report.pass {
            cdc_pass = true;
            break;
        }
    }
    let em_pass = candidates[..k].iter().any(|c| exact_match(c, &record.reference_code));
    Ok(RecordOutcome {
        index,
        migration_type: record.migration_type,
        cdc_pass,
        em_pass,
        error_class: if cdc_pass { None } else { first_error },
    })
}

pub fn evaluate_outcomes(records: &[EvalRecord], candidates: &[Vec<String>], k: usize) -> Result<Vec<RecordOutcome>, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if candidates.len() != records.len() {
        return Err(EvalError::CandidateCountMismatch {
            index: candidates.len().min(records.len()),
            found: candidates.len(),
            needed: records.len(),
        });
    }
    let run = |(i, (r, c)): (usize, (&EvalRecord, &Vec<String>))| evaluate_record(i, r, c, k);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        records.par_iter().zip(candidates.par_iter()).enumerate().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        records.iter().zip(candidates.iter()).enumerate().map(run).collect()
    }
}

pub fn summarize(outcomes: &[RecordOutcome], k: usize) -> MetricsSummary {
    let mut overall = GroupMetrics::default();
    let mut by_type: BTreeMap<MigrationType, GroupMetrics> = BTreeMap::new();
    for o in outcomes {
        overall.add(o);
        by_type.entry(o.migration_type).or_default().add(o);
    }
    overall.finish();
    by_type.values_mut().for_each(GroupMetrics::finish);
    MetricsSummary { k, overall, by_type }
}

pub fn evaluate_dataset(records: &[EvalRecord], candidates: &[Vec<String>], k: usize) -> Result<MetricsSummary, EvalError> {
    Ok(summarize(&evaluate_outcomes(records, candidates, k)?, k))
}
