//! Per-organ "with/without background removal" summaries.
//!
//! Rows are keyed by dataset, backend and organ. Means weight every case
//! equally, regardless of volume size.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::evaluate::{CaseFile, CaseStatus, RunRecord};
use super::{io_err, ReportError};
use crate::protocol::SimulationResult;

pub(crate) struct Group {
    pub passes: usize,
    pub results: Vec<SimulationResult>,
    pub n_skipped: usize,
    pub n_failed: usize,
}

/// `(dataset, backend, organ)`
pub(crate) type GroupKey = (String, String, String);

/// Gather case files from run directories. The same case may appear only
/// once per group.
pub(crate) fn load_groups(dirs: &[PathBuf]) -> Result<BTreeMap<GroupKey, Group>, ReportError> {
    if dirs.is_empty() {
        return Err(ReportError::NoRecords);
    }
    let mut groups: BTreeMap<GroupKey, Group> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for dir in dirs {
        let record = RunRecord::load(dir)?;
        let key = (
            record.manifest_name.clone(),
            record.backend.clone(),
            record.organ.clone(),
        );
        let group = groups.entry(key.clone()).or_insert_with(|| Group {
            passes: 0,
            results: Vec::new(),
            n_skipped: 0,
            n_failed: 0,
        });
        group.passes = group.passes.max(record.config.max_annotated_slices);
        for case in record.load_cases(dir)? {
            let CaseFile {
                status,
                result,
                case_id,
                ..
            } = case;
            if !seen.insert((key.clone(), case_id.clone())) {
                return Err(ReportError::DuplicateCase {
                    case_id,
                    dir: dir.clone(),
                });
            }
            match (status, result) {
                (CaseStatus::Ok, Some(r)) => group.results.push(r),
                (CaseStatus::Skipped, _) => group.n_skipped += 1,
                _ => group.n_failed += 1,
            }
        }
    }
    Ok(groups)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub backend: String,
    pub organ: String,
    pub n_cases: usize,
    pub n_skipped: usize,
    pub n_failed: usize,
    /// Mean best Dice per convention; `None` without successful cases.
    pub with_removal: Option<f64>,
    pub without_removal: Option<f64>,
}

impl SummaryRow {
    /// Table cell, e.g. `0.898/0.737`.
    pub fn cell(&self) -> String {
        match (self.with_removal, self.without_removal) {
            (Some(w), Some(wo)) => format_cell(w, wo),
            _ => "-/-".to_string(),
        }
    }
}

pub fn format_cell(with_removal: f64, without_removal: f64) -> String {
    format!("{:.3}/{:.3}", with_removal, without_removal)
}

pub fn summarize(dirs: &[PathBuf]) -> Result<Vec<SummaryRow>, ReportError> {
    let groups = load_groups(dirs)?;
    Ok(groups
        .into_iter()
        .map(|((dataset, backend, organ), g)| {
            let n = g.results.len();
            let mean =
                |f: fn(&SimulationResult) -> f64| (n > 0).then(|| g.results.iter().map(f).sum::<f64>() / n as f64);
            SummaryRow {
                dataset,
                backend,
                organ,
                n_cases: n,
                n_skipped: g.n_skipped,
                n_failed: g.n_failed,
                with_removal: mean(|r| r.best.with_removal),
                without_removal: mean(|r| r.best.without_removal),
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{:.6}", x)).unwrap_or_default()
}

/// Quote a field if it holds a comma, quote or newline.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("dataset,backend,organ,n_cases,n_skipped,n_failed,with_removal,without_removal,cell\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.dataset),
            csv_field(&r.backend),
            csv_field(&r.organ),
            r.n_cases,
            r.n_skipped,
            r.n_failed,
            opt(r.with_removal),
            opt(r.without_removal),
            r.cell()
        )
        .unwrap();
    }
    out
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let organ_w = rows.iter().map(|r| r.organ.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    writeln!(
        out,
        "Best Dice with/without background removal (mean over cases, each case weighted equally)"
    )
    .unwrap();
    let mut heading = None;
    for r in rows {
        if heading != Some((&r.dataset, &r.backend)) {
            writeln!(out, "{} [{}]", r.dataset, r.backend).unwrap();
            heading = Some((&r.dataset, &r.backend));
        }
        writeln!(
            out,
            "  {:<organ_w$}  {:>11}  (n={}, skipped={}, failed={})",
            r.organ,
            r.cell(),
            r.n_cases,
            r.n_skipped,
            r.n_failed
        )
        .unwrap();
    }
    out
}

/// Summarize run directories; writes the CSV when `csv_out` is given.
pub fn cmd_summarize(dirs: &[PathBuf], csv_out: Option<&Path>) -> Result<Vec<SummaryRow>, ReportError> {
    let rows = summarize(dirs)?;
    if let Some(path) = csv_out {
        std::fs::write(path, summary_csv(&rows)).map_err(io_err(path))?;
    }
    Ok(rows)
}
