//! Deterministic in-process backends built from the ground truth.
//!
//! All three return the exact ground-truth plane for any slice that has
//! received prompts. They differ only in how `propagate` fills the rest:
//!
//! * `Oracle` returns the ground truth everywhere.
//! * `Noisy` dilates the ground truth on unprompted slices, so every
//!   prompted slice becomes exact and the score improves pass by pass.
//! * `Leaky` copies the nearest prompted slice that carries foreground onto
//!   every unprompted slice (ties go to the lower index), over-tracking into
//!   slices where the object is absent. A slice cleared by negative clicks is
//!   exact itself but does not stop the leak into its neighbours.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::backend::{validate_points, BackendError, BackendSession, SessionState};
use crate::mask::{dilate3x3, Mask2D, Mask3D};
use crate::protocol::ClickPoint;

/// Dilation steps applied by the noisy mock on unprompted slices. The halo
/// must be at least three pixels thick for any of it to survive the 3x3
/// erosion applied before correction clicks.
pub const NOISY_DILATION_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MockKind {
    Oracle,
    Noisy,
    Leaky,
}

impl MockKind {
    pub fn name(self) -> &'static str {
        match self {
            MockKind::Oracle => "oracle",
            MockKind::Noisy => "noisy",
            MockKind::Leaky => "leaky",
        }
    }
}

impl FromStr for MockKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(MockKind::Oracle),
            "noisy" => Ok(MockKind::Noisy),
            "leaky" => Ok(MockKind::Leaky),
            other => Err(BackendError::UnknownBuiltin(other.to_string())),
        }
    }
}

impl fmt::Display for MockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct MockSession {
    kind: MockKind,
    id: String,
    gt: Mask3D,
    prompts: Vec<ClickPoint>,
    prompted: BTreeSet<usize>,
    add_calls: usize,
    propagate_calls: usize,
    state: SessionState,
}

impl MockSession {
    pub fn new(kind: MockKind, gt: Mask3D) -> Self {
        MockSession {
            kind,
            id: format!("builtin-{}", kind.name()),
            gt,
            prompts: Vec::new(),
            prompted: BTreeSet::new(),
            add_calls: 0,
            propagate_calls: 0,
            state: SessionState::Open,
        }
    }

    pub fn kind(&self) -> MockKind {
        self.kind
    }

    pub fn prompts(&self) -> &[ClickPoint] {
        &self.prompts
    }

    pub fn prompted_slices(&self) -> &BTreeSet<usize> {
        &self.prompted
    }

    pub fn add_calls(&self) -> usize {
        self.add_calls
    }

    pub fn propagate_calls(&self) -> usize {
        self.propagate_calls
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    fn gt_plane(&self, z: usize) -> Mask2D {
        self.gt.slice_of(z).expect("slice index checked")
    }

    /// What `propagate` returns for the current prompt set.
    pub fn prediction(&self) -> Mask3D {
        let nz = self.gt.depth();
        match self.kind {
            MockKind::Oracle => self.gt.clone(),
            MockKind::Noisy => {
                let planes: Vec<Mask2D> = (0..nz)
                    .map(|z| {
                        let plane = self.gt_plane(z);
                        if self.prompted.contains(&z) {
                            plane
                        } else {
                            dilate3x3(&plane, NOISY_DILATION_STEPS)
                        }
                    })
                    .collect();
                Mask3D::from_slices(&planes)
            }
            MockKind::Leaky => {
                let sources: Vec<usize> = self
                    .prompted
                    .iter()
                    .copied()
                    .filter(|&a| !self.gt_plane(a).is_empty())
                    .collect();
                let planes: Vec<Mask2D> = (0..nz)
                    .map(|z| {
                        if self.prompted.contains(&z) {
                            return self.gt_plane(z);
                        }
                        match sources.iter().copied().min_by_key(|&a| (a.abs_diff(z), a)) {
                            Some(src) => self.gt_plane(src),
                            None => Mask2D::new(self.gt.shape()[0], self.gt.shape()[1]),
                        }
                    })
                    .collect();
                Mask3D::from_slices(&planes)
            }
        }
    }

    fn ensure_open(&self) -> Result<(), BackendError> {
        match self.state {
            SessionState::Open => Ok(()),
            SessionState::Closed => Err(BackendError::Closed),
        }
    }
}

impl BackendSession for MockSession {
    fn session_id(&self) -> &str {
        &self.id
    }

    fn add_points(&mut self, slice: usize, points: &[ClickPoint]) -> Result<Mask2D, BackendError> {
        self.ensure_open()?;
        validate_points(self.gt.shape(), slice, points)?;
        self.add_calls += 1;
        self.prompts.extend_from_slice(points);
        if !points.is_empty() {
            self.prompted.insert(slice);
        }
        Ok(self.gt_plane(slice))
    }

    fn propagate(&mut self) -> Result<Mask3D, BackendError> {
        self.ensure_open()?;
        if self.prompted.is_empty() {
            return Err(BackendError::InvalidRequest("propagate before any prompt".into()));
        }
        self.propagate_calls += 1;
        Ok(self.prediction())
    }

    fn close(&mut self) -> Result<(), BackendError> {
        self.ensure_open()?;
        self.state = SessionState::Closed;
        Ok(())
    }
}
