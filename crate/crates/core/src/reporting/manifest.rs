use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{file_stem, read_json, ReportError};

/// A dataset description. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub cases: Vec<ManifestCase>,
    /// Organ name to label id.
    pub labels: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub case_id: String,
    pub image_path: PathBuf,
    pub label_path: PathBuf,
}

impl DatasetManifest {
    /// Parse, resolve paths, and check ids are unique and files exist.
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let mut manifest: DatasetManifest = read_json(path).map_err(|e| match e {
            ReportError::Io { path, source } => {
                ReportError::Manifest(format!("cannot read {}: {}", path.display(), source))
            }
            ReportError::Json { path, source } => ReportError::Manifest(format!("{}: {}", path.display(), source)),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for case in &mut manifest.cases {
            if case.image_path.is_relative() {
                case.image_path = base.join(&case.image_path);
            }
            if case.label_path.is_relative() {
                case.label_path = base.join(&case.label_path);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let mut seen = BTreeSet::new();
        let mut stems = BTreeSet::new();
        for case in &self.cases {
            if case.case_id.is_empty() {
                return Err(ReportError::Manifest("empty case_id".into()));
            }
            if !seen.insert(case.case_id.as_str()) {
                return Err(ReportError::Manifest(format!("duplicate case_id `{}`", case.case_id)));
            }
            // result files are named after the id with unsafe characters replaced
            if !stems.insert(file_stem(&case.case_id)) {
                return Err(ReportError::Manifest(format!(
                    "case_id `{}` collides with another id after filename sanitizing",
                    case.case_id
                )));
            }
            for p in [&case.image_path, &case.label_path] {
                if !p.is_file() {
                    return Err(ReportError::Manifest(format!(
                        "case `{}`: file {} does not exist",
                        case.case_id,
                        p.display()
                    )));
                }
            }
        }
        if let Some((name, _)) = self.labels.iter().find(|(_, &id)| id == 0) {
            return Err(ReportError::Manifest(format!("organ `{}` uses reserved label 0", name)));
        }
        Ok(())
    }

    pub fn label_id(&self, organ: &str) -> Result<u32, ReportError> {
        self.labels.get(organ).copied().ok_or_else(|| {
            ReportError::Manifest(format!(
                "organ `{}` not in label map (known: {})",
                organ,
                self.labels.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }
}
