//! Newline-delimited JSON messages exchanged with subprocess backends.
//!
//! Requests: `init`, `add_points`, `propagate`, `close`.
//! Responses: `ok`, `mask2d`, `mask3d`, `error`. Each response echoes the id
//! of the request it answers.

use serde::{Deserialize, Serialize};

use crate::backend::rle::RleMask;
use crate::protocol::{ClickPoint, Polarity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub id: u64,
    #[serde(flatten)]
    pub body: WireBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireBody {
    Init {
        volume_path: String,
        shape: [usize; 3],
        spacing: [f32; 3],
        datatype: String,
    },
    AddPoints {
        slice: usize,
        points: Vec<WirePoint>,
    },
    Propagate,
    Close,
    Ok,
    Mask2d {
        shape: Vec<usize>,
        runs: Vec<u64>,
    },
    Mask3d {
        shape: Vec<usize>,
        runs: Vec<u64>,
    },
    Error {
        message: String,
    },
}

impl WireBody {
    pub fn kind(&self) -> &'static str {
        match self {
            WireBody::Init { .. } => "init",
            WireBody::AddPoints { .. } => "add_points",
            WireBody::Propagate => "propagate",
            WireBody::Close => "close",
            WireBody::Ok => "ok",
            WireBody::Mask2d { .. } => "mask2d",
            WireBody::Mask3d { .. } => "mask3d",
            WireBody::Error { .. } => "error",
        }
    }

    pub fn mask2d(rle: RleMask) -> Self {
        WireBody::Mask2d {
            shape: rle.shape,
            runs: rle.runs,
        }
    }

    pub fn mask3d(rle: RleMask) -> Self {
        WireBody::Mask3d {
            shape: rle.shape,
            runs: rle.runs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePoint {
    pub row: usize,
    pub col: usize,
    pub positive: bool,
}

impl From<&ClickPoint> for WirePoint {
    fn from(c: &ClickPoint) -> Self {
        WirePoint {
            row: c.point.row,
            col: c.point.col,
            positive: c.polarity == Polarity::Positive,
        }
    }
}

impl WireMessage {
    pub fn new(id: u64, body: WireBody) -> Self {
        WireMessage { id, body }
    }

    /// One line of JSON without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }
}
