//! Dataset evaluation runs and their summaries.

pub mod curves;
pub mod evaluate;
pub mod manifest;
pub mod phantoms;
pub mod summary;

use std::path::PathBuf;

use thiserror::Error;

use crate::volume_io::NiftiError;

pub use curves::{cmd_curves, render_svg, CurveSet};
pub use evaluate::{cmd_evaluate, CaseFile, CaseStatus, EvaluateOptions, RunRecord};
pub use manifest::{DatasetManifest, ManifestCase};
pub use phantoms::{
    generate_phantoms, make_phantoms, Ellipsoid, PhantomCase, LESION_LABEL, ORGAN_LABEL, PHANTOM_CASES, PHANTOM_SHAPE,
    PHANTOM_SPACING,
};
pub use summary::{cmd_summarize, SummaryRow};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Nifti(#[from] NiftiError),
    #[error("no run records found")]
    NoRecords,
    #[error("case {case_id} from {dir} was already loaded for the same dataset, backend and organ")]
    DuplicateCase { case_id: String, dir: PathBuf },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> ReportError {
    let path = path.into();
    move |source| ReportError::Io { path, source }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types always serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Make a string safe to use as a file name component.
pub(crate) fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}
