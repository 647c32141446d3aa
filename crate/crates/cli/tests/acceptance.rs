//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fail.

mod common;
#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clicksim::backend::{BackendSession, RleMask, SubprocessSession};
use clicksim::{binarize_label, read_nifti, BackendError, ClickPoint, LabelVolume, Mask3D};
use common::*;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Phantom data plus evaluate runs shared by several criteria.
struct Fixture {
    root: tempfile::TempDir,
    manifest: PathBuf,
    /// `(backend, organ)` to run directory, seed 7.
    runs: BTreeMap<(String, String), PathBuf>,
}

const BACKENDS: [&str; 3] = ["builtin:oracle", "builtin:noisy", "builtin:leaky"];
const ORGANS: [&str; 2] = ["organ", "lesion"];

impl Fixture {
    fn build() -> Result<Self, String> {
        let root = tempfile::tempdir().map_err(|e| e.to_string())?;
        let data = root.path().join("data");
        let out = clicksim(&["make-phantoms", "--out", p(&data), "--seed", "0"]);
        ensure(out.status.success(), || {
            format!("make-phantoms failed: {}", stderr(&out))
        })?;
        let manifest = data.join("manifest.json");
        let mut runs = BTreeMap::new();
        for backend in BACKENDS {
            for organ in ORGANS {
                let dir = root.path().join(format!("{}__{}", backend.replace(':', "_"), organ));
                evaluate(&manifest, organ, backend, &dir)?;
                runs.insert((backend.to_string(), organ.to_string()), dir);
            }
        }
        Ok(Fixture { root, manifest, runs })
    }

    fn run(&self, backend: &str, organ: &str) -> &Path {
        &self.runs[&(backend.to_string(), organ.to_string())]
    }

    /// Ground truth of one case, read back from its label file.
    fn gt(&self, case_id: &str, organ: &str) -> Mask3D {
        let path = self
            .manifest
            .parent()
            .unwrap()
            .join("labels")
            .join(format!("{case_id}.nii.gz"));
        let labels = LabelVolume::from_volume(&read_nifti(path).unwrap()).unwrap();
        let id = if organ == "organ" { 1 } else { 2 };
        binarize_label(&labels, id)
    }
}

fn evaluate(manifest: &Path, organ: &str, backend: &str, dir: &Path) -> Result<(), String> {
    let out = clicksim(&[
        "evaluate",
        "--manifest",
        p(manifest),
        "--organ",
        organ,
        "--backend",
        backend,
        "--passes",
        "8",
        "--seed",
        "7",
        "--workers",
        "2",
        "--out",
        p(dir),
    ]);
    ensure(out.status.success(), || {
        format!("evaluate {backend} {organ}: {}", stderr(&out))
    })
}

fn case_files(dir: &Path) -> Vec<Value> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("cases"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| serde_json::from_slice(&fs::read(p).unwrap()).unwrap())
        .collect()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn series(case: &Value, key: &str) -> Vec<f64> {
    case["result"]["passes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["dice"][key].as_f64().unwrap())
        .collect()
}

fn morphology_oracle() -> Outcome {
    let start = Instant::now();
    let bad = support::morphology_mismatches(0xacce, 1000);
    let took = start.elapsed();
    ensure(bad.is_empty(), || {
        format!("{} mismatches, e.g. {:?}", bad.len(), &bad[..bad.len().min(3)])
    })?;
    ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("1000 masks, 0 mismatches, {:.2}s", took.as_secs_f64()))
}

fn dice_theorem() -> Outcome {
    let bad = support::dice_theorem_violations(0xacce, 1000);
    ensure(bad.is_empty(), || {
        format!("{} violations, e.g. {:?}", bad.len(), &bad[..bad.len().min(3)])
    })?;
    Ok("1000 pairs, 0 violations".into())
}

fn determinism(fx: &Fixture) -> Outcome {
    let mut checked = 0;
    for backend in BACKENDS {
        for organ in ORGANS {
            let again = fx
                .root
                .path()
                .join(format!("again_{}_{}", backend.replace(':', "_"), organ));
            evaluate(&fx.manifest, organ, backend, &again)?;
            let first = fx.run(backend, organ);
            ensure(
                dir_bytes(&first.join("cases")) == dir_bytes(&again.join("cases")),
                || format!("{backend}/{organ}: case files differ"),
            )?;
            checked += dir_bytes(&again.join("cases")).len();
        }
    }
    let summary = |name: &str, dirs: Vec<PathBuf>| -> Result<Vec<u8>, String> {
        let csv = fx.root.path().join(name);
        let mut args = vec!["summarize".to_string(), "--out".into(), p(&csv).into(), "--in".into()];
        args.extend(dirs.iter().map(|d| p(d).to_string()));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = clicksim(&args);
        ensure(out.status.success(), || stderr(&out))?;
        Ok(fs::read(&csv).unwrap())
    };
    let firsts: Vec<PathBuf> = fx.runs.values().cloned().collect();
    let agains: Vec<PathBuf> = fx
        .runs
        .keys()
        .map(|(b, o)| fx.root.path().join(format!("again_{}_{}", b.replace(':', "_"), o)))
        .collect();
    ensure(summary("s1.csv", firsts)? == summary("s2.csv", agains)?, || {
        "summary CSVs differ".into()
    })?;
    Ok(format!("{checked} case files and summary CSV byte-identical"))
}

fn oracle_end_to_end(fx: &Fixture) -> Outcome {
    let mut n = 0;
    for organ in ORGANS {
        for case in case_files(fx.run("builtin:oracle", organ)) {
            let r = &case["result"];
            let id = case["case_id"].as_str().unwrap();
            ensure(
                r["best"]["with_removal"] == 1.0 && r["best"]["without_removal"] == 1.0,
                || format!("{id}/{organ}: best {}", r["best"]),
            )?;
            ensure(r["passes"].as_array().unwrap().len() == 1, || {
                format!("{id}/{organ}: more than one pass")
            })?;
            ensure(r["stop_reason"] == "no_correctable_error", || {
                format!("{id}/{organ}: {}", r["stop_reason"])
            })?;
            n += 1;
        }
    }
    Ok(format!("{n} cases at 1.000/1.000 after one pass"))
}

fn leaky_gap(fx: &Fixture) -> Outcome {
    let mut worst = f64::INFINITY;
    for organ in ORGANS {
        let cases = case_files(fx.run("builtin:leaky", organ));
        for case in &cases {
            let gt = fx.gt(case["case_id"].as_str().unwrap(), organ);
            ensure(2 * support::foreground_slices(&gt) <= gt.depth(), || {
                "object covers over half the slices".into()
            })?;
        }
        for k in 0..8 {
            let at = |c: &Value, key: &str| {
                let s = series(c, key);
                s[k.min(s.len() - 1)]
            };
            let n = cases.len() as f64;
            let gap = cases
                .iter()
                .map(|c| at(c, "with_removal") - at(c, "without_removal"))
                .sum::<f64>()
                / n;
            worst = worst.min(gap);
            ensure(gap >= 0.15, || format!("{organ}: mean gap {gap:.3} at pass {}", k + 1))?;
        }
    }
    Ok(format!("minimum mean gap {worst:.3} over passes 1..8"))
}

fn noisy_curve(fx: &Fixture) -> Outcome {
    let mut n = 0;
    for organ in ORGANS {
        for case in case_files(fx.run("builtin:noisy", organ)) {
            let id = case["case_id"].as_str().unwrap();
            let s = series(&case, "with_removal");
            ensure(s.windows(2).all(|w| w[1] >= w[0]), || format!("{id}/{organ}: {s:?}"))?;
            let nfg = support::foreground_slices(&fx.gt(id, organ));
            let by = nfg.min(8);
            let reached = s.iter().position(|&v| v == 1.0).map(|i| i + 1);
            ensure(reached.is_some_and(|k| k <= by), || {
                format!("{id}/{organ}: 1.0 at {reached:?}, needed by {by}")
            })?;
            n += 1;
        }
    }
    Ok(format!(
        "{n} cases non-decreasing, perfect by pass min(8, foreground slices)"
    ))
}

fn click_budget(fx: &Fixture) -> Outcome {
    let mut passes = 0;
    for dir in fx.runs.values() {
        for case in case_files(dir) {
            let r: clicksim::SimulationResult = serde_json::from_value(case["result"].clone()).unwrap();
            let bad = support::budget_violations(&r, 5, 3, 8);
            ensure(bad.is_empty(), || format!("{bad:?}"))?;
            passes += r.passes.len();
        }
    }
    Ok(format!("{passes} passes over {} runs within budget", fx.runs.len()))
}

fn wire_conformance(fx: &Fixture) -> Outcome {
    let data = fx.manifest.parent().unwrap();
    let image_path = data.join("images/phantom_000.nii.gz");
    let labels = data.join("labels/phantom_000.nii.gz");
    let image = read_nifti(&image_path).map_err(|e| e.to_string())?;
    let gt = fx.gt("phantom_000", "organ");
    let (z, seed) = clicksim::foreground_seed(&gt).unwrap();
    let click = [ClickPoint::positive(z, seed)];
    let open = |faults: &[&str], t: Duration| {
        SubprocessSession::open(&fake_backend(&labels, 1, "leaky", faults), &image, &image_path, t, t)
    };
    let t = Duration::from_secs(20);

    let mut s = open(&[], t).map_err(|e| e.to_string())?;
    let m2 = s.add_points(z, &click).map_err(|e| e.to_string())?;
    ensure(m2 == gt.slice_of(z).unwrap(), || "add_points mask differs".into())?;
    s.propagate().map_err(|e| e.to_string())?;
    s.close().map_err(|e| e.to_string())?;

    let mut s = open(&["oversized-run@2"], t).map_err(|e| e.to_string())?;
    match s.add_points(z, &click) {
        Err(BackendError::ProtocolViolation(m)) if m.contains("runs sum to") => {}
        other => return Err(format!("oversized run: {other:?}")),
    }
    let mut s = open(&["hang@3"], Duration::from_millis(500)).map_err(|e| e.to_string())?;
    s.add_points(z, &click).map_err(|e| e.to_string())?;
    match s.propagate() {
        Err(BackendError::Timeout {
            id: 3,
            kind: "propagate",
            ..
        }) => {}
        other => return Err(format!("timeout: {other:?}")),
    }
    let mut s = open(&["error@2"], t).map_err(|e| e.to_string())?;
    match s.add_points(z, &click) {
        Err(BackendError::Remote(m)) if m == "injected failure" => {}
        other => return Err(format!("error reply: {other:?}")),
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x41e);
    for i in 0..1000 {
        if i % 2 == 0 {
            let m = support::random_mask(&mut rng, 64);
            let back = RleMask::from_mask2d(&m).to_mask2d().map_err(|e| e.to_string())?;
            ensure(back == m, || format!("2D mask {i} changed"))?;
        } else {
            let shape = [rng.gen_range(1..16), rng.gen_range(1..16), rng.gen_range(1..16)];
            let density = rng.gen_range(0.0..1.0);
            let m = support::random_volume(&mut rng, shape, density);
            let back = RleMask::from_mask3d(&m).to_mask3d().map_err(|e| e.to_string())?;
            ensure(back == m, || format!("3D mask {i} changed"))?;
        }
    }
    Ok("init/add_points/propagate/close, oversized run, timeout, error reply; 1000 RLE round trips".into())
}

fn nifti_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bad = support::nifti_round_trip_failures(dir.path(), 0xacce);
    ensure(bad.is_empty(), || format!("{bad:?}"))?;
    Ok("6 datatypes exact (plain and gzip); byte-swapped twins identical".into())
}

fn main() -> ExitCode {
    let fixture = Fixture::build();
    let with_fixture = |f: fn(&Fixture) -> Outcome| -> Outcome {
        match &fixture {
            Ok(fx) => f(fx),
            Err(e) => Err(format!("fixture: {e}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("morphology oracle equivalence", morphology_oracle()),
        ("dice convention theorem", dice_theorem()),
        ("protocol determinism", with_fixture(determinism)),
        ("oracle end-to-end", with_fixture(oracle_end_to_end)),
        ("over-tracking gap", with_fixture(leaky_gap)),
        ("improvement curve", with_fixture(noisy_curve)),
        ("click-budget conformance", with_fixture(click_budget)),
        ("wire protocol conformance", with_fixture(wire_conformance)),
        ("nifti round trip", nifti_round_trip()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} passed, {} failed", results.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
