//! The segmentation-backend boundary.
//!
//! A backend is opened once per case and then driven through
//! [`BackendSession::add_points`] and [`BackendSession::propagate`]. Prompts
//! accumulate for the lifetime of the session. Backends are either one of the
//! deterministic builtin mocks or an external process speaking the
//! line-delimited JSON protocol in [`wire`].

pub mod mock;
pub mod rle;
pub mod server;
pub mod subprocess;
pub mod wire;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::mask::{Mask2D, Mask3D};
use crate::protocol::ClickPoint;
use crate::volume_io::Volume;

pub use mock::{MockKind, MockSession};
pub use rle::{RleError, RleMask};
pub use subprocess::SubprocessSession;
pub use wire::{WireBody, WireMessage, WirePoint};

pub const DEFAULT_REQUEST_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("failed to spawn backend `{command}`: {source}")]
    SpawnFailure {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend did not answer init within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("backend did not answer `{kind}` request {id} within {timeout:?}")]
    Timeout {
        id: u64,
        kind: &'static str,
        timeout: Duration,
    },
    /// The backend replied with `kind = "error"`.
    #[error("backend error: {0}")]
    Remote(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("session is closed")]
    Closed,
    #[error("unknown builtin backend `{0}` (expected oracle, noisy or leaky)")]
    UnknownBuiltin(String),
    #[error("bad backend command: {0}")]
    BadCommand(String),
    #[error("backend i/o failure: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Open,
    Closed,
}

pub trait BackendSession: Send {
    fn session_id(&self) -> &str;

    /// Append `points` (all on `slice`) to the prompt set and return the
    /// refined 2D prediction for that slice.
    fn add_points(&mut self, slice: usize, points: &[ClickPoint]) -> Result<Mask2D, BackendError>;

    /// Full-volume prediction honoring every prompt received so far.
    fn propagate(&mut self) -> Result<Mask3D, BackendError>;

    fn close(&mut self) -> Result<(), BackendError>;
}

/// Opens one session per case.
pub trait SessionFactory: Sync {
    fn open(
        &self,
        volume: &Volume,
        volume_path: Option<&Path>,
        gt: &Mask3D,
    ) -> Result<Box<dyn BackendSession>, BackendError>;
}

/// `builtin:<name>` or a command-line template with an optional `{volume}`
/// placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Builtin(MockKind),
    Command(String),
}

impl FromStr for BackendSpec {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(name) = s.strip_prefix("builtin:") {
            return name.parse().map(BackendSpec::Builtin);
        }
        if s.is_empty() {
            return Err(BackendError::BadCommand("empty backend command".into()));
        }
        Ok(BackendSpec::Command(s.to_string()))
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Builtin(kind) => write!(f, "builtin:{}", kind.name()),
            BackendSpec::Command(cmd) => f.write_str(cmd),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Backend {
    pub spec: BackendSpec,
    pub request_timeout: Duration,
    pub handshake_timeout: Duration,
}

impl Backend {
    pub fn new(spec: BackendSpec) -> Self {
        Backend {
            spec,
            request_timeout: DEFAULT_REQUEST_TIMEOUT,
            handshake_timeout: DEFAULT_REQUEST_TIMEOUT,
        }
    }

    pub fn with_timeouts(mut self, request: Duration, handshake: Duration) -> Self {
        self.request_timeout = request;
        self.handshake_timeout = handshake;
        self
    }
}

/// Open a session. Builtin mocks see the ground truth; subprocess backends
/// only receive the volume's path and geometry.
pub fn open_session(
    backend: &Backend,
    volume: &Volume,
    volume_path: Option<&Path>,
    gt: &Mask3D,
) -> Result<Box<dyn BackendSession>, BackendError> {
    match &backend.spec {
        BackendSpec::Builtin(kind) => Ok(Box::new(MockSession::new(*kind, gt.clone()))),
        BackendSpec::Command(template) => {
            let path = volume_path
                .ok_or_else(|| BackendError::InvalidRequest("subprocess backends need a file-backed volume".into()))?;
            Ok(Box::new(SubprocessSession::open(
                template,
                volume,
                path,
                backend.request_timeout,
                backend.handshake_timeout,
            )?))
        }
    }
}

impl SessionFactory for Backend {
    fn open(
        &self,
        volume: &Volume,
        volume_path: Option<&Path>,
        gt: &Mask3D,
    ) -> Result<Box<dyn BackendSession>, BackendError> {
        open_session(self, volume, volume_path, gt)
    }
}

/// Shared request checks for every session kind.
pub(crate) fn validate_points(shape: [usize; 3], slice: usize, points: &[ClickPoint]) -> Result<(), BackendError> {
    if slice >= shape[2] {
        return Err(BackendError::InvalidRequest(format!(
            "slice {} out of range for depth {}",
            slice, shape[2]
        )));
    }
    for p in points {
        if p.slice != slice {
            return Err(BackendError::InvalidRequest(format!(
                "point on slice {} sent with slice {}",
                p.slice, slice
            )));
        }
        if p.point.row >= shape[0] || p.point.col >= shape[1] {
            return Err(BackendError::InvalidRequest(format!(
                "point ({}, {}) outside {}x{} slice",
                p.point.row, p.point.col, shape[0], shape[1]
            )));
        }
    }
    Ok(())
}
