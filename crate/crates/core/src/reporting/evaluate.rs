use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestCase};
use super::{file_stem, io_err, read_json, write_json, ReportError};
use crate::backend::Backend;
use crate::protocol::{run_simulation, ProtocolConfig, SimulationResult};
use crate::volume_io::{binarize_label, read_nifti, LabelVolume};

pub const HARNESS_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RUN_RECORD_FILE: &str = "run.json";
pub const CASES_DIR: &str = "cases";

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub manifest: PathBuf,
    pub organ: String,
    pub backend: Backend,
    pub config: ProtocolConfig,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Re-run cases whose result file already exists.
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Ok,
    /// The organ is absent from this case's label map.
    Skipped,
    Failed,
}

/// Contents of `cases/<case_id>.json`. Holds nothing time-dependent, so
/// identical runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub dataset: String,
    pub organ: String,
    pub case_id: String,
    pub backend: String,
    pub config: ProtocolConfig,
    pub status: CaseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SimulationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub case_id: String,
    pub status: CaseStatus,
    pub wall_clock_secs: f64,
    /// Loaded from an earlier run's result file instead of re-running.
    pub reused: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest_name: String,
    pub organ: String,
    pub label_id: u32,
    pub backend: String,
    pub config: ProtocolConfig,
    pub harness_version: String,
    pub cases: Vec<CaseEntry>,
    pub n_ok: usize,
    pub n_skipped: usize,
    pub n_failed: usize,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self, ReportError> {
        read_json(&dir.join(RUN_RECORD_FILE))
    }

    /// Per-case files in manifest order.
    pub fn load_cases(&self, dir: &Path) -> Result<Vec<CaseFile>, ReportError> {
        self.cases
            .iter()
            .map(|c| read_json(&case_path(dir, &c.case_id)))
            .collect()
    }
}

pub fn case_path(out_dir: &Path, case_id: &str) -> PathBuf {
    out_dir.join(CASES_DIR).join(format!("{}.json", file_stem(case_id)))
}

struct CaseContext<'a> {
    dataset: &'a str,
    organ: &'a str,
    label_id: u32,
    backend: &'a Backend,
    backend_name: String,
    config: &'a ProtocolConfig,
}

fn simulate_case(ctx: &CaseContext<'_>, case: &ManifestCase) -> Result<(CaseStatus, Option<SimulationResult>), String> {
    let image = read_nifti(&case.image_path).map_err(|e| e.to_string())?;
    let labels = read_nifti(&case.label_path).map_err(|e| e.to_string())?;
    if labels.shape != image.shape {
        return Err(format!(
            "label shape {:?} does not match image shape {:?}",
            labels.shape, image.shape
        ));
    }
    let labels = LabelVolume::from_volume(&labels).map_err(|e| e.to_string())?;
    let gt = binarize_label(&labels, ctx.label_id);
    if gt.is_empty() {
        return Ok((CaseStatus::Skipped, None));
    }
    let result = run_simulation(
        &image,
        Some(&case.image_path),
        &gt,
        ctx.label_id,
        ctx.backend,
        ctx.config,
        &case.case_id,
    )
    .map_err(|e| e.to_string())?;
    Ok((CaseStatus::Ok, Some(result)))
}

fn run_case(ctx: &CaseContext<'_>, case: &ManifestCase, out_dir: &Path, force: bool) -> Result<CaseEntry, ReportError> {
    let path = case_path(out_dir, &case.case_id);
    if !force && path.is_file() {
        if let Ok(prev) = read_json::<CaseFile>(&path) {
            let same_run = prev.dataset == ctx.dataset
                && prev.organ == ctx.organ
                && prev.case_id == case.case_id
                && prev.backend == ctx.backend_name
                && prev.config == *ctx.config;
            if same_run && prev.status != CaseStatus::Failed {
                return Ok(CaseEntry {
                    case_id: case.case_id.clone(),
                    status: prev.status,
                    wall_clock_secs: 0.0,
                    reused: true,
                    message: prev.message,
                });
            }
        }
    }

    let start = Instant::now();
    let (status, result, message) = match simulate_case(ctx, case) {
        Ok((CaseStatus::Skipped, _)) => (
            CaseStatus::Skipped,
            None,
            Some(format!("organ `{}` (label {}) absent", ctx.organ, ctx.label_id)),
        ),
        Ok((status, result)) => (status, result, None),
        Err(msg) => (CaseStatus::Failed, None, Some(msg)),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let file = CaseFile {
        dataset: ctx.dataset.to_string(),
        organ: ctx.organ.to_string(),
        case_id: case.case_id.clone(),
        backend: ctx.backend_name.clone(),
        config: *ctx.config,
        status,
        message: message.clone(),
        result,
    };
    write_json(&path, &file)?;
    Ok(CaseEntry {
        case_id: case.case_id.clone(),
        status,
        wall_clock_secs: elapsed,
        reused: false,
        message,
    })
}

/// Simulate every manifest case for one organ, writing one result file per
/// case plus `run.json`. Per-case failures are recorded, not returned.
pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<RunRecord, ReportError> {
    let manifest = DatasetManifest::load(&opts.manifest)?;
    let label_id = manifest.label_id(&opts.organ)?;
    opts.config
        .validate()
        .map_err(|e| ReportError::Manifest(e.to_string()))?;
    fs::create_dir_all(opts.out_dir.join(CASES_DIR)).map_err(io_err(&opts.out_dir))?;

    let ctx = CaseContext {
        dataset: &manifest.name,
        organ: &opts.organ,
        label_id,
        backend: &opts.backend,
        backend_name: opts.backend.spec.to_string(),
        config: &opts.config,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| ReportError::Pool(e.to_string()))?;
    let cases = pool.install(|| {
        manifest
            .cases
            .par_iter()
            .map(|case| run_case(&ctx, case, &opts.out_dir, opts.force))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let count = |s: CaseStatus| cases.iter().filter(|c| c.status == s).count();
    let record = RunRecord {
        manifest_name: manifest.name.clone(),
        organ: opts.organ.clone(),
        label_id,
        backend: ctx.backend_name.clone(),
        config: opts.config,
        harness_version: HARNESS_VERSION.to_string(),
        n_ok: count(CaseStatus::Ok),
        n_skipped: count(CaseStatus::Skipped),
        n_failed: count(CaseStatus::Failed),
        cases,
    };
    write_json(&opts.out_dir.join(RUN_RECORD_FILE), &record)?;
    Ok(record)
}
