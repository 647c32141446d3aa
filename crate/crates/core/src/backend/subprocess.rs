//! External backend process driven over stdin/stdout.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crate::backend::rle::RleMask;
use crate::backend::wire::{WireBody, WireMessage, WirePoint};
use crate::backend::{validate_points, BackendError, BackendSession, SessionState};
use crate::mask::{Mask2D, Mask3D};
use crate::protocol::ClickPoint;
use crate::volume_io::Volume;

const STDERR_TAIL: usize = 20;
const EXIT_GRACE: Duration = Duration::from_secs(2);

/// Split a command template and substitute `{volume}` in every argument.
pub fn expand_command(template: &str, volume_path: &Path) -> Result<Vec<String>, BackendError> {
    let words =
        shlex::split(template).ok_or_else(|| BackendError::BadCommand(format!("cannot parse `{}`", template)))?;
    if words.is_empty() {
        return Err(BackendError::BadCommand("empty backend command".into()));
    }
    let path = volume_path.to_string_lossy();
    Ok(words.into_iter().map(|w| w.replace("{volume}", &path)).collect())
}

pub struct SubprocessSession {
    id: String,
    child: Child,
    stdin: Option<ChildStdin>,
    replies: Receiver<String>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    next_id: u64,
    shape: [usize; 3],
    timeout: Duration,
    state: SessionState,
    prompted: bool,
}

impl SubprocessSession {
    /// Spawn the backend and perform the `init` handshake.
    pub fn open(
        template: &str,
        volume: &Volume,
        volume_path: &Path,
        request_timeout: Duration,
        handshake_timeout: Duration,
    ) -> Result<Self, BackendError> {
        let argv = expand_command(template, volume_path)?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| BackendError::SpawnFailure {
                command: argv.join(" "),
                source,
            })?;

        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let stderr = child.stderr.take().expect("stderr is piped");

        let (tx, replies) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) if l.trim().is_empty() => continue,
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });

        let stderr_tail = Arc::new(Mutex::new(VecDeque::new()));
        let tail = Arc::clone(&stderr_tail);
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                let mut t = tail.lock().unwrap();
                if t.len() == STDERR_TAIL {
                    t.pop_front();
                }
                t.push_back(line);
            }
        });

        let mut session = SubprocessSession {
            id: format!("pid-{}", child.id()),
            child,
            stdin,
            replies,
            stderr_tail,
            next_id: 1,
            shape: volume.shape,
            timeout: request_timeout,
            state: SessionState::Open,
            prompted: false,
        };

        let init = WireBody::Init {
            volume_path: volume_path.to_string_lossy().into_owned(),
            shape: volume.shape,
            spacing: volume.spacing,
            datatype: volume.datatype().name().to_string(),
        };
        let reply = session.request_with(init, handshake_timeout).map_err(|e| match e {
            BackendError::Timeout { .. } => BackendError::HandshakeTimeout(handshake_timeout),
            other => other,
        })?;
        match reply {
            WireBody::Ok => Ok(session),
            other => Err(session.violation(format!("expected `ok` in reply to init, got `{}`", other.kind()))),
        }
    }

    /// Recent lines the backend wrote to stderr.
    pub fn stderr_tail(&self) -> Vec<String> {
        self.stderr_tail.lock().unwrap().iter().cloned().collect()
    }

    pub fn next_request_id(&self) -> u64 {
        self.next_id
    }

    fn violation(&mut self, msg: String) -> BackendError {
        self.kill();
        BackendError::ProtocolViolation(msg)
    }

    fn kill(&mut self) {
        self.state = SessionState::Closed;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn request_with(&mut self, body: WireBody, timeout: Duration) -> Result<WireBody, BackendError> {
        if self.state == SessionState::Closed {
            return Err(BackendError::Closed);
        }
        let id = self.next_id;
        self.next_id += 1;
        let kind = body.kind();
        let line = WireMessage::new(id, body).to_line();

        let stdin = self.stdin.as_mut().ok_or(BackendError::Closed)?;
        if let Err(e) = stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush())
        {
            self.kill();
            return Err(BackendError::Io(format!("writing `{}` request: {}", kind, e)));
        }

        let reply = match self.replies.recv_timeout(timeout) {
            Ok(line) => line,
            Err(RecvTimeoutError::Timeout) => {
                // A late reply would desynchronize the channel; give up on the process.
                self.kill();
                return Err(BackendError::Timeout { id, kind, timeout });
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.kill();
                let tail = self.stderr_tail().join("\n");
                return Err(BackendError::Io(format!(
                    "backend exited before answering `{}` request {}{}",
                    kind,
                    id,
                    if tail.is_empty() {
                        String::new()
                    } else {
                        format!("; stderr:\n{}", tail)
                    }
                )));
            }
        };
        let msg = match WireMessage::parse(&reply) {
            Ok(m) => m,
            Err(e) => return Err(self.violation(format!("unparseable reply to request {}: {} ({})", id, reply, e))),
        };
        if msg.id != id {
            return Err(self.violation(format!("reply id {} does not match request id {}", msg.id, id)));
        }
        match msg.body {
            WireBody::Error { message } => Err(BackendError::Remote(message)),
            body @ (WireBody::Ok | WireBody::Mask2d { .. } | WireBody::Mask3d { .. }) => Ok(body),
            other => Err(self.violation(format!("request kind `{}` sent as a reply", other.kind()))),
        }
    }

    fn request(&mut self, body: WireBody) -> Result<WireBody, BackendError> {
        self.request_with(body, self.timeout)
    }
}

impl BackendSession for SubprocessSession {
    fn session_id(&self) -> &str {
        &self.id
    }

    fn add_points(&mut self, slice: usize, points: &[ClickPoint]) -> Result<Mask2D, BackendError> {
        if self.state == SessionState::Closed {
            return Err(BackendError::Closed);
        }
        validate_points(self.shape, slice, points)?;
        let body = WireBody::AddPoints {
            slice,
            points: points.iter().map(WirePoint::from).collect(),
        };
        let reply = self.request(body)?;
        self.prompted |= !points.is_empty();
        match reply {
            WireBody::Mask2d { shape, runs } => {
                if shape != [self.shape[0], self.shape[1]] {
                    return Err(self.violation(format!(
                        "mask2d shape {:?} does not match slice shape {:?}",
                        shape,
                        &self.shape[..2]
                    )));
                }
                RleMask { shape, runs }
                    .to_mask2d()
                    .map_err(|e| self.violation(e.to_string()))
            }
            other => Err(self.violation(format!("expected `mask2d` reply to add_points, got `{}`", other.kind()))),
        }
    }

    fn propagate(&mut self) -> Result<Mask3D, BackendError> {
        if self.state == SessionState::Closed {
            return Err(BackendError::Closed);
        }
        if !self.prompted {
            return Err(BackendError::InvalidRequest("propagate before any prompt".into()));
        }
        match self.request(WireBody::Propagate)? {
            WireBody::Mask3d { shape, runs } => {
                if shape != self.shape {
                    return Err(self.violation(format!(
                        "mask3d shape {:?} does not match volume shape {:?}",
                        shape, self.shape
                    )));
                }
                RleMask { shape, runs }
                    .to_mask3d()
                    .map_err(|e| self.violation(e.to_string()))
            }
            other => Err(self.violation(format!("expected `mask3d` reply to propagate, got `{}`", other.kind()))),
        }
    }

    fn close(&mut self) -> Result<(), BackendError> {
        let reply = self.request(WireBody::Close);
        self.state = SessionState::Closed;
        self.stdin = None;
        // Give the process a moment to exit on its own before killing it.
        let deadline = std::time::Instant::now() + EXIT_GRACE;
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if std::time::Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    break;
                }
            }
        }
        match reply? {
            WireBody::Ok => Ok(()),
            other => Err(BackendError::ProtocolViolation(format!(
                "expected `ok` reply to close, got `{}`",
                other.kind()
            ))),
        }
    }
}

impl Drop for SubprocessSession {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
