#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const FAKE_BACKEND: &str = env!("CARGO_BIN_EXE_clicksim-fake-backend");
pub const CLI: &str = env!("CARGO_BIN_EXE_clicksim");

/// Command template that serves `mock` from `labels`, with `{volume}` left
/// for the harness to fill in.
pub fn fake_backend(labels: &Path, label: u32, mock: &str, faults: &[&str]) -> String {
    let mut t = format!(
        "'{}' --labels '{}' --label {} --mock {} --volume {{volume}}",
        FAKE_BACKEND,
        labels.display(),
        label,
        mock
    );
    for f in faults {
        t.push_str(&format!(" --fault {f}"));
    }
    t
}

pub fn clicksim(args: &[&str]) -> Output {
    Command::new(CLI).args(args).output().expect("run clicksim")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Phantom dataset under `dir`; returns the manifest path.
pub fn phantoms(dir: &Path, seed: u64) -> PathBuf {
    clicksim::reporting::make_phantoms(dir, seed).expect("write phantoms");
    dir.join("manifest.json")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}
