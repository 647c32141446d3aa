//! The interactive annotation simulation.
//!
//! Pass 1 seeds a positive click at the foreground center, refines that
//! slice with up to `initial_clicks` clicks, and propagates through the
//! volume. Every later pass picks the worst-scoring slice that has not been
//! annotated yet, places up to `correction_clicks` clicks there, and
//! propagates again. A run ends after `max_annotated_slices` passes or as
//! soon as no click can be placed.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, BackendSession, SessionFactory};
use crate::mask::{
    erode3x3, foreground_seed, interior_center, largest_component, Connectivity, Mask2D, Mask3D, PixelPoint,
};
use crate::metrics::{best_dice, dice_pair, error_regions, slice_scores, DicePair, MetricError, SliceScore};
use crate::volume_io::Volume;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("backend failure: {0}")]
    BackendFailure(#[from] BackendError),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("image shape {image:?} does not match ground truth shape {gt:?}")]
    ShapeMismatch { image: [usize; 3], gt: [usize; 3] },
    #[error("backend returned a {got:?} mask where {expected:?} was expected")]
    BadPredictionShape { got: Vec<usize>, expected: Vec<usize> },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl From<MetricError> for SimulationError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::ShapeMismatch(got, expected) => SimulationError::BadPredictionShape { got, expected },
            MetricError::EmptyGroundTruth => SimulationError::EmptyGroundTruth,
            other => unreachable!("metric error outside aggregation: {}", other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub max_annotated_slices: usize,
    pub initial_clicks: usize,
    pub correction_clicks: usize,
    pub connectivity: Connectivity,
    pub rng_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            max_annotated_slices: 8,
            initial_clicks: 5,
            correction_clicks: 3,
            connectivity: Connectivity::Eight,
            rng_seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.max_annotated_slices < 1 {
            return Err(SimulationError::InvalidConfig(
                "max_annotated_slices must be at least 1".into(),
            ));
        }
        if self.initial_clicks < 1 {
            return Err(SimulationError::InvalidConfig(
                "initial_clicks must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClickPoint {
    pub slice: usize,
    pub point: PixelPoint,
    pub polarity: Polarity,
}

impl ClickPoint {
    pub fn positive(slice: usize, point: PixelPoint) -> Self {
        ClickPoint {
            slice,
            point,
            polarity: Polarity::Positive,
        }
    }

    pub fn negative(slice: usize, point: PixelPoint) -> Self {
        ClickPoint {
            slice,
            point,
            polarity: Polarity::Negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass_index: usize,
    pub annotated_slice: usize,
    pub clicks: Vec<ClickPoint>,
    pub dice: DicePair,
    pub slice_scores: Vec<SliceScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CompletedAllPasses,
    /// Nothing left to correct: every unannotated slice is perfect, or no
    /// error pixel survives erosion on the worst one.
    NoCorrectableError,
    /// The backend answered the first pass with an error instead of a mask;
    /// the pass is scored as an empty prediction.
    EmptyInitialError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub case_id: String,
    pub target_label: u32,
    pub passes: Vec<PassRecord>,
    pub best: DicePair,
    pub stop_reason: StopReason,
}

impl SimulationResult {
    pub fn dice_series(&self) -> Vec<DicePair> {
        self.passes.iter().map(|p| p.dice).collect()
    }
}

fn check_prediction_2d(pred: &Mask2D, gt: &Mask2D) -> Result<(), SimulationError> {
    if pred.shape() != gt.shape() {
        return Err(SimulationError::BadPredictionShape {
            got: pred.shape().to_vec(),
            expected: gt.shape().to_vec(),
        });
    }
    Ok(())
}

/// Center of the largest component of `region`.
fn region_center(region: &Mask2D, connectivity: Connectivity) -> PixelPoint {
    let comp = largest_component(region, connectivity).expect("caller checked region is non-empty");
    interior_center(&comp).expect("component is non-empty")
}

/// First-slice refinement: a positive click at `seed_point`, then one click
/// per backend round trip at the center of the larger eroded error region
/// until `initial_clicks` clicks or no error survives erosion.
pub fn initial_annotation(
    session: &mut dyn BackendSession,
    slice: usize,
    gt_slice: &Mask2D,
    seed_point: PixelPoint,
    cfg: &ProtocolConfig,
) -> Result<(Vec<ClickPoint>, Mask2D), SimulationError> {
    let first = ClickPoint::positive(slice, seed_point);
    let mut clicks = vec![first];
    let mut refined = session.add_points(slice, &[first])?;
    check_prediction_2d(&refined, gt_slice)?;
    while clicks.len() < cfg.initial_clicks {
        let (fp, fn_) = error_regions(&refined, gt_slice)?;
        let (fp, fn_) = (erode3x3(&fp), erode3x3(&fn_));
        if fp.is_empty() && fn_.is_empty() {
            break;
        }
        let click = if fp.count() > fn_.count() {
            ClickPoint::negative(slice, region_center(&fp, cfg.connectivity))
        } else {
            ClickPoint::positive(slice, region_center(&fn_, cfg.connectivity))
        };
        clicks.push(click);
        refined = session.add_points(slice, &[click])?;
        check_prediction_2d(&refined, gt_slice)?;
    }
    Ok((clicks, refined))
}

/// Lowest Dice among slices not yet annotated; ties go to the most error
/// pixels, then the lowest index. `None` when every candidate is perfect.
pub fn select_worst_slice(scores: &[SliceScore], already_annotated: &BTreeSet<usize>) -> Option<usize> {
    scores
        .iter()
        .filter(|s| !already_annotated.contains(&s.slice) && s.dice < 1.0)
        .min_by(|a, b| {
            a.dice
                .total_cmp(&b.dice)
                .then(b.error_pixels.cmp(&a.error_pixels))
                .then(a.slice.cmp(&b.slice))
        })
        .map(|s| s.slice)
}

fn nth_point(region: &Mask2D, n: usize) -> PixelPoint {
    region.points().nth(n).expect("index drawn below region size")
}

/// Correction clicks for one slice, computed in one batch against the
/// propagated prediction: a positive click at the eroded false-negative
/// center, a negative click at the eroded false-positive center, and a click
/// drawn uniformly from whichever eroded region is larger (false negatives
/// on a tie). At most `cfg.correction_clicks` are returned.
pub fn correction_clicks(
    slice: usize,
    pred: &Mask2D,
    gt: &Mask2D,
    cfg: &ProtocolConfig,
    rng: &mut impl Rng,
) -> Result<Vec<ClickPoint>, SimulationError> {
    check_prediction_2d(pred, gt)?;
    let (fp, fn_) = error_regions(pred, gt)?;
    let (fp, fn_) = (erode3x3(&fp), erode3x3(&fn_));
    let mut clicks = Vec::with_capacity(3);
    if !fn_.is_empty() {
        clicks.push(ClickPoint::positive(slice, region_center(&fn_, cfg.connectivity)));
    }
    if !fp.is_empty() {
        clicks.push(ClickPoint::negative(slice, region_center(&fp, cfg.connectivity)));
    }
    if !(fp.is_empty() && fn_.is_empty()) {
        let (region, polarity) = if fp.count() > fn_.count() {
            (&fp, Polarity::Negative)
        } else {
            (&fn_, Polarity::Positive)
        };
        let point = nth_point(region, rng.gen_range(0..region.count()));
        if !clicks.iter().any(|c| c.point == point) {
            clicks.push(ClickPoint { slice, point, polarity });
        }
    }
    clicks.truncate(cfg.correction_clicks);
    Ok(clicks)
}

/// 64-bit FNV-1a, used to derive a per-case seed from its id.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn case_rng(seed: u64, case_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(case_id.as_bytes()))
}

fn record(
    pass_index: usize,
    annotated_slice: usize,
    clicks: Vec<ClickPoint>,
    pred: &Mask3D,
    gt: &Mask3D,
) -> Result<PassRecord, SimulationError> {
    Ok(PassRecord {
        pass_index,
        annotated_slice,
        clicks,
        dice: dice_pair(pred, gt)?,
        slice_scores: slice_scores(pred, gt)?,
    })
}

/// Run the full protocol for one case and target label.
pub fn run_simulation(
    image: &Volume,
    image_path: Option<&Path>,
    gt: &Mask3D,
    target_label: u32,
    backend: &dyn SessionFactory,
    cfg: &ProtocolConfig,
    case_id: &str,
) -> Result<SimulationResult, SimulationError> {
    cfg.validate()?;
    if image.shape != gt.shape() {
        return Err(SimulationError::ShapeMismatch {
            image: image.shape,
            gt: gt.shape(),
        });
    }
    let (seed_slice, seed_point) = foreground_seed(gt).map_err(|_| SimulationError::EmptyGroundTruth)?;
    let gt_seed_slice = gt.slice_of(seed_slice).expect("seed slice is in range");
    let mut rng = case_rng(cfg.rng_seed, case_id);

    let mut session = backend.open(image, image_path, gt)?;
    let mut passes = Vec::new();

    let first = initial_annotation(session.as_mut(), seed_slice, &gt_seed_slice, seed_point, cfg)
        .and_then(|(clicks, _)| Ok((clicks, session.propagate()?)));
    let (clicks, mut pred) = match first {
        Ok(v) => v,
        Err(SimulationError::BackendFailure(BackendError::Remote(_))) => {
            let empty = Mask3D::new(gt.shape());
            passes.push(record(
                1,
                seed_slice,
                vec![ClickPoint::positive(seed_slice, seed_point)],
                &empty,
                gt,
            )?);
            let _ = session.close();
            return Ok(finish(case_id, target_label, passes, StopReason::EmptyInitialError));
        }
        Err(e) => return Err(e),
    };
    passes.push(record(1, seed_slice, clicks, &pred, gt)?);

    let mut annotated = BTreeSet::from([seed_slice]);
    let mut stop = StopReason::CompletedAllPasses;
    for pass_index in 2..=cfg.max_annotated_slices {
        let scores = &passes.last().expect("pass 1 recorded").slice_scores;
        let Some(worst) = select_worst_slice(scores, &annotated) else {
            stop = StopReason::NoCorrectableError;
            break;
        };
        let gt_slice = gt.slice_of(worst).expect("scored slice is in range");
        let pred_slice = pred.slice_of(worst).expect("scored slice is in range");
        let clicks = correction_clicks(worst, &pred_slice, &gt_slice, cfg, &mut rng)?;
        if clicks.is_empty() {
            stop = StopReason::NoCorrectableError;
            break;
        }
        let refined = session.add_points(worst, &clicks)?;
        check_prediction_2d(&refined, &gt_slice)?;
        pred = session.propagate()?;
        annotated.insert(worst);
        passes.push(record(pass_index, worst, clicks, &pred, gt)?);
    }
    session.close()?;
    Ok(finish(case_id, target_label, passes, stop))
}

fn finish(case_id: &str, target_label: u32, passes: Vec<PassRecord>, stop_reason: StopReason) -> SimulationResult {
    let best = best_dice(&passes.iter().map(|p| p.dice).collect::<Vec<_>>()).expect("at least one pass");
    SimulationResult {
        case_id: case_id.to_string(),
        target_label,
        passes,
        best,
        stop_reason,
    }
}
