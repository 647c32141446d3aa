//! Interactive click-simulation benchmark for 3D segmentation backends.
//!
//! The harness treats a CT volume as a stack of axial slices, simulates a
//! user clicking on one slice at a time, lets a pluggable backend propagate
//! the prompts through the stack, and scores the result with Dice computed
//! both with and without slices that contain no ground truth.

pub mod backend;
pub mod mask;
pub mod metrics;
pub mod protocol;
pub mod reporting;
pub mod volume_io;

pub use backend::{open_session, Backend, BackendError, BackendSession, BackendSpec, MockKind, SessionFactory};
pub use mask::{
    connected_components, erode3x3, foreground_seed, interior_center, largest_component, Connectivity, Mask2D, Mask3D,
    MaskError, PixelPoint,
};
pub use metrics::{
    aggregate_curve, best_dice, dice2d, dice3d, error_regions, Convention, CurvePoint, DicePair, MetricError,
    SliceScore,
};
pub use protocol::{
    correction_clicks, initial_annotation, run_simulation, select_worst_slice, ClickPoint, PassRecord, Polarity,
    ProtocolConfig, SimulationError, SimulationResult, StopReason,
};
pub use volume_io::{binarize_label, read_nifti, write_nifti, DataType, LabelVolume, NiftiError, Volume, VoxelData};
