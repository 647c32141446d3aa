use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use clicksim::reporting::summary::summary_table;
use clicksim::reporting::{cmd_curves, cmd_evaluate, cmd_summarize, make_phantoms, EvaluateOptions};
use clicksim::{Backend, BackendSpec, Connectivity, ProtocolConfig};

#[derive(Parser)]
#[command(
    name = "clicksim",
    version,
    about = "Interactive click-simulation benchmark for 3D segmentation backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate annotation sessions for every case of a dataset manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Organ name from the manifest's label map.
        #[arg(long)]
        organ: String,
        /// `builtin:oracle|noisy|leaky`, or a command line with a `{volume}` placeholder.
        #[arg(long)]
        backend: String,
        /// Maximum number of annotated slices (passes).
        #[arg(long, default_value_t = 8)]
        passes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        initial_clicks: usize,
        #[arg(long, default_value_t = 3)]
        correction_clicks: usize,
        #[arg(long, default_value = "8", value_parser = ["4", "8"])]
        connectivity: String,
        /// Per-request backend timeout in seconds.
        #[arg(long, default_value_t = 300)]
        timeout_secs: u64,
        /// Re-run cases that already have a result file.
        #[arg(long)]
        force: bool,
    },
    /// Mean best Dice per organ, printed as `with/without`.
    Summarize {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dice-versus-annotated-slices curves (CSV and SVG per organ).
    Curves {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic phantom dataset and its manifest.
    MakePhantoms {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Evaluate {
            manifest,
            organ,
            backend,
            passes,
            seed,
            workers,
            out,
            initial_clicks,
            correction_clicks,
            connectivity,
            timeout_secs,
            force,
        } => {
            let spec: BackendSpec = backend.parse()?;
            let timeout = Duration::from_secs(timeout_secs);
            let connectivity = if connectivity == "4" {
                Connectivity::Four
            } else {
                Connectivity::Eight
            };
            let opts = EvaluateOptions {
                manifest,
                organ,
                backend: Backend::new(spec).with_timeouts(timeout, timeout),
                config: ProtocolConfig {
                    max_annotated_slices: passes,
                    initial_clicks,
                    correction_clicks,
                    connectivity,
                    rng_seed: seed,
                },
                workers,
                out_dir: out,
                force,
            };
            let record = cmd_evaluate(&opts)?;
            for case in record.cases.iter().filter(|c| c.message.is_some()) {
                eprintln!(
                    "{} [{:?}]: {}",
                    case.case_id,
                    case.status,
                    case.message.as_deref().unwrap_or("")
                );
            }
            println!(
                "{} / {}: {} ok, {} skipped, {} failed -> {}",
                record.manifest_name,
                record.organ,
                record.n_ok,
                record.n_skipped,
                record.n_failed,
                opts.out_dir.display()
            );
            Ok(if record.n_failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Summarize { inputs, out } => {
            let rows = cmd_summarize(&inputs, out.as_deref())?;
            print!("{}", summary_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::Curves { inputs, out } => {
            for path in cmd_curves(&inputs, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::MakePhantoms { out, seed } => {
            let manifest =
                make_phantoms(&out, seed).with_context(|| format!("writing phantoms to {}", out.display()))?;
            println!(
                "{} cases -> {}",
                manifest.cases.len(),
                out.join("manifest.json").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
