//! Dice scores, error regions, and per-pass aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{Mask2D, Mask3D};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("dice series is empty")]
    EmptySeries,
    #[error("no cases to aggregate")]
    NoCases,
}

/// Which slices count toward a volumetric Dice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Only slices whose ground truth has foreground.
    WithRemoval,
    /// Every voxel.
    WithoutRemoval,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::WithRemoval => "with_removal",
            Convention::WithoutRemoval => "without_removal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceScore {
    pub slice: usize,
    pub dice: f64,
    pub error_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicePair {
    pub with_removal: f64,
    pub without_removal: f64,
}

impl DicePair {
    pub fn get(&self, convention: Convention) -> f64 {
        match convention {
            Convention::WithRemoval => self.with_removal,
            Convention::WithoutRemoval => self.without_removal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub annotated_slices: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

fn dice_from_counts(intersection: usize, pred: usize, gt: usize) -> f64 {
    if pred + gt == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / (pred + gt) as f64
    }
}

fn check_2d(pred: &Mask2D, gt: &Mask2D) -> Result<(), MetricError> {
    if pred.shape() != gt.shape() {
        return Err(MetricError::ShapeMismatch(pred.shape().to_vec(), gt.shape().to_vec()));
    }
    Ok(())
}

/// `2|A∩B| / (|A|+|B|)`, with 1.0 for two empty masks.
pub fn dice2d(pred: &Mask2D, gt: &Mask2D) -> Result<f64, MetricError> {
    check_2d(pred, gt)?;
    let (mut i, mut p, mut g) = (0, 0, 0);
    for (&a, &b) in pred.bits().iter().zip(gt.bits()) {
        i += usize::from(a && b);
        p += usize::from(a);
        g += usize::from(b);
    }
    Ok(dice_from_counts(i, p, g))
}

/// Volumetric Dice. With `remove_background_slices`, planes whose ground
/// truth is empty are dropped before counting.
pub fn dice3d(pred: &Mask3D, gt: &Mask3D, remove_background_slices: bool) -> Result<f64, MetricError> {
    if pred.shape() != gt.shape() {
        return Err(MetricError::ShapeMismatch(pred.shape().to_vec(), gt.shape().to_vec()));
    }
    if gt.is_empty() {
        return Err(MetricError::EmptyGroundTruth);
    }
    let (mut i, mut p, mut g) = (0, 0, 0);
    for (ps, gs) in pred.slices().zip(gt.slices()) {
        let gc = gs.count();
        if remove_background_slices && gc == 0 {
            continue;
        }
        i += ps.and(&gs).count();
        p += ps.count();
        g += gc;
    }
    Ok(dice_from_counts(i, p, g))
}

pub fn dice_pair(pred: &Mask3D, gt: &Mask3D) -> Result<DicePair, MetricError> {
    Ok(DicePair {
        with_removal: dice3d(pred, gt, true)?,
        without_removal: dice3d(pred, gt, false)?,
    })
}

/// `(false positives, false negatives)`.
pub fn error_regions(pred: &Mask2D, gt: &Mask2D) -> Result<(Mask2D, Mask2D), MetricError> {
    check_2d(pred, gt)?;
    Ok((pred.and_not(gt), gt.and_not(pred)))
}

pub fn slice_scores(pred: &Mask3D, gt: &Mask3D) -> Result<Vec<SliceScore>, MetricError> {
    if pred.shape() != gt.shape() {
        return Err(MetricError::ShapeMismatch(pred.shape().to_vec(), gt.shape().to_vec()));
    }
    pred.slices()
        .zip(gt.slices())
        .enumerate()
        .map(|(slice, (p, g))| {
            let (fp, fn_) = error_regions(&p, &g)?;
            Ok(SliceScore {
                slice,
                dice: dice2d(&p, &g)?,
                error_pixels: fp.count() + fn_.count(),
            })
        })
        .collect()
}

/// Component-wise maximum over passes.
pub fn best_dice(series: &[DicePair]) -> Result<DicePair, MetricError> {
    let first = *series.first().ok_or(MetricError::EmptySeries)?;
    Ok(series.iter().skip(1).fold(first, |acc, d| DicePair {
        with_removal: acc.with_removal.max(d.with_removal),
        without_removal: acc.without_removal.max(d.without_removal),
    }))
}

/// Mean and normal-approximation 95% interval at each pass `1..=passes`.
/// Series shorter than `passes` hold their final value.
pub fn aggregate_curve(
    per_case: &[Vec<DicePair>],
    convention: Convention,
    passes: usize,
) -> Result<Vec<CurvePoint>, MetricError> {
    if per_case.is_empty() {
        return Err(MetricError::NoCases);
    }
    if per_case.iter().any(|s| s.is_empty()) {
        return Err(MetricError::EmptySeries);
    }
    let n = per_case.len();
    let points = (0..passes)
        .map(|k| {
            let values: Vec<f64> = per_case
                .iter()
                .map(|s| s.get(k).unwrap_or_else(|| s.last().unwrap()).get(convention))
                .collect();
            let mean = values.iter().sum::<f64>() / n as f64;
            let half = if n > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                1.96 * var.sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                annotated_slices: k + 1,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
                n,
            }
        })
        .collect();
    Ok(points)
}
