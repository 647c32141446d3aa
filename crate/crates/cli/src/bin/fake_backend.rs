//! A wire-protocol backend that serves the builtin mocks from a label file,
//! with optional injected faults for conformance testing.
//!
//! ```text
//! clicksim-fake-backend --labels L.nii.gz --label 1 --mock leaky --fault error@3
//! ```
//!
//! Faults fire on the n-th request received (1-based):
//! `error`, `oversized-run`, `wrong-id`, `wrong-kind`, `wrong-shape`,
//! `garbage`, `hang`, `exit`.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Parser;
use clicksim::backend::server::{dispatch, InitRequest, WireHandler};
use clicksim::backend::{BackendSession, MockKind, MockSession, WireBody, WireMessage, WirePoint};
use clicksim::{binarize_label, read_nifti, ClickPoint, LabelVolume, Mask2D, Mask3D, PixelPoint, Polarity};

#[derive(Parser)]
struct Args {
    /// Label map the mock treats as ground truth.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 1)]
    label: u32,
    #[arg(long, default_value = "oracle")]
    mock: String,
    /// `kind@n`; may be repeated.
    #[arg(long = "fault")]
    faults: Vec<String>,
    /// Accepted for command templates that pass the volume path; unused.
    #[arg(long)]
    volume: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Fault {
    Error,
    OversizedRun,
    WrongId,
    WrongKind,
    WrongShape,
    Garbage,
    Hang,
    Exit,
}

fn parse_fault(s: &str) -> Result<(usize, Fault)> {
    let (kind, n) = s.split_once('@').context("fault must look like kind@n")?;
    let fault = match kind {
        "error" => Fault::Error,
        "oversized-run" => Fault::OversizedRun,
        "wrong-id" => Fault::WrongId,
        "wrong-kind" => Fault::WrongKind,
        "wrong-shape" => Fault::WrongShape,
        "garbage" => Fault::Garbage,
        "hang" => Fault::Hang,
        "exit" => Fault::Exit,
        other => bail!("unknown fault `{}`", other),
    };
    Ok((n.parse()?, fault))
}

struct MockHandler {
    kind: MockKind,
    gt: Mask3D,
    session: Option<MockSession>,
}

impl WireHandler for MockHandler {
    fn init(&mut self, request: InitRequest) -> Result<(), String> {
        if request.shape != self.gt.shape() {
            return Err(format!(
                "volume shape {:?} does not match label shape {:?}",
                request.shape,
                self.gt.shape()
            ));
        }
        self.session = Some(MockSession::new(self.kind, self.gt.clone()));
        Ok(())
    }

    fn add_points(&mut self, slice: usize, points: &[WirePoint]) -> Result<Mask2D, String> {
        let session = self.session.as_mut().ok_or("add_points before init")?;
        let clicks: Vec<ClickPoint> = points
            .iter()
            .map(|p| ClickPoint {
                slice,
                point: PixelPoint::new(p.row, p.col),
                polarity: if p.positive {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
            })
            .collect();
        session.add_points(slice, &clicks).map_err(|e| e.to_string())
    }

    fn propagate(&mut self) -> Result<Mask3D, String> {
        let session = self.session.as_mut().ok_or("propagate before init")?;
        session.propagate().map_err(|e| e.to_string())
    }

    fn close(&mut self) -> Result<(), String> {
        self.session = None;
        Ok(())
    }
}

fn corrupt(reply: WireMessage, fault: Fault) -> String {
    match fault {
        Fault::Error => WireMessage::new(
            reply.id,
            WireBody::Error {
                message: "injected failure".into(),
            },
        )
        .to_line(),
        Fault::OversizedRun => {
            let body = match reply.body {
                WireBody::Mask2d { shape, mut runs } => {
                    runs.push(1_000_000);
                    WireBody::Mask2d { shape, runs }
                }
                WireBody::Mask3d { shape, mut runs } => {
                    runs.push(1_000_000);
                    WireBody::Mask3d { shape, runs }
                }
                other => other,
            };
            WireMessage::new(reply.id, body).to_line()
        }
        Fault::WrongId => WireMessage::new(reply.id + 1, reply.body).to_line(),
        Fault::WrongKind => WireMessage::new(reply.id, WireBody::Ok).to_line(),
        Fault::WrongShape => WireMessage::new(
            reply.id,
            WireBody::Mask2d {
                shape: vec![1, 1],
                runs: vec![1],
            },
        )
        .to_line(),
        Fault::Garbage => "this is not json".to_string(),
        Fault::Hang | Fault::Exit => unreachable!("handled before replying"),
    }
}

fn main() -> Result<()> {
    let args = Args::parse();
    let faults = args.faults.iter().map(|f| parse_fault(f)).collect::<Result<Vec<_>>>()?;
    let kind: MockKind = args.mock.parse()?;
    let labels = LabelVolume::from_volume(&read_nifti(&args.labels)?)?;
    let mut handler = MockHandler {
        kind,
        gt: binarize_label(&labels, args.label),
        session: None,
    };

    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for (n, line) in stdin.lock().lines().enumerate() {
        let line = line?;
        let fault = faults.iter().find(|(at, _)| *at == n + 1).map(|&(_, f)| f);
        match fault {
            Some(Fault::Hang) => loop {
                std::thread::sleep(Duration::from_secs(3600));
            },
            Some(Fault::Exit) => {
                eprintln!("fake backend exiting on request {}", n + 1);
                std::process::exit(3);
            }
            _ => {}
        }
        let request = WireMessage::parse(&line).context("unparseable request")?;
        let closing = matches!(request.body, WireBody::Close);
        let reply = dispatch(&mut handler, request);
        let text = match fault {
            Some(f) => corrupt(reply, f),
            None => reply.to_line(),
        };
        writeln!(stdout, "{}", text)?;
        stdout.flush()?;
        if closing {
            break;
        }
    }
    Ok(())
}
