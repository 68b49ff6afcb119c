//! Rectangle metric, top-1 accuracy over folds, and threshold sweeps.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::anchor::{decode, AnchorGrid};
use crate::geom::{angle_diff, jaccard, RotatedRect};
use crate::loss::DetectionTensor;

pub const SWEEP_JACCARD: [f64; 4] = [0.20, 0.25, 0.30, 0.35];
pub const SWEEP_ANGLE: [f64; 5] = [10.0, 15.0, 20.0, 25.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspCandidate {
    pub rect: RotatedRect,
    /// Graspable confidence in [0, 1].
    pub score: f64,
    /// Source anchor, when the candidate came from a detection tensor.
    pub anchor: Option<usize>,
}

/// A prediction is correct when, for some ground truth, the angle difference
/// is at most `angle_threshold` degrees and the Jaccard index is strictly
/// above `jaccard_threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub jaccard_threshold: f64,
    pub angle_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            jaccard_threshold: 0.25,
            angle_threshold: 30.0,
        }
    }
}

pub fn rect_metric(pred: &RotatedRect, gts: &[RotatedRect], cfg: &EvalConfig) -> bool {
    gts.iter().any(|g| {
        angle_diff(pred.theta(), g.theta()) <= cfg.angle_threshold
            && jaccard(pred, g) > cfg.jaccard_threshold
    })
}

fn rank(a: &GraspCandidate, b: &GraspCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| {
        a.anchor
            .unwrap_or(usize::MAX)
            .cmp(&b.anchor.unwrap_or(usize::MAX))
    })
}

/// Highest score; ties go to the lower anchor index, then to list order.
pub fn top1(cands: &[GraspCandidate]) -> Option<&GraspCandidate> {
    cands.iter().reduce(|best, c| {
        if rank(c, best) == Ordering::Less {
            c
        } else {
            best
        }
    })
}

/// Every anchor whose softmax graspable score exceeds `threshold`, decoded,
/// hardest first (descending score, lower anchor index on ties). Anchors
/// whose offsets do not decode to a valid rectangle are skipped.
pub fn multi_grasps(
    tensor: &DetectionTensor,
    grid: &AnchorGrid,
    threshold: f64,
) -> Vec<GraspCandidate> {
    let mut out: Vec<GraspCandidate> = (0..tensor.anchors())
        .filter_map(|a| {
            let score = tensor.probabilities(a).0;
            if score.is_nan() || score <= threshold {
                return None;
            }
            let rect = decode(grid.get(a), &tensor.offsets(a), grid.k()).ok()?;
            Some(GraspCandidate {
                rect,
                score,
                anchor: Some(a),
            })
        })
        .collect();
    out.sort_by(rank);
    out
}

/// Ground truth and predictions of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub id: String,
    pub gts: Vec<RotatedRect>,
    pub candidates: Vec<GraspCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Correct,
    Wrong,
    /// No prediction for the image; counts as a failure.
    Missing,
}

pub fn score_image(image: &ImageEval, cfg: &EvalConfig) -> Outcome {
    match top1(&image.candidates) {
        None => Outcome::Missing,
        Some(best) if rect_metric(&best.rect, &image.gts, cfg) => Outcome::Correct,
        Some(_) => Outcome::Wrong,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub config: EvalConfig,
    pub per_fold: Vec<f64>,
    /// Mean over folds that contain images.
    pub mean: f64,
    pub images: usize,
    /// `(fold, image id)` of images without any prediction.
    pub missing: Vec<(usize, String)>,
}

impl AccuracyReport {
    /// Aggregates per-image outcomes, grouped by fold.
    pub fn from_outcomes(
        folds: &[Vec<ImageEval>],
        outcomes: &[Vec<Outcome>],
        config: EvalConfig,
    ) -> Self {
        let mut per_fold = Vec::with_capacity(folds.len());
        let mut missing = Vec::new();
        let mut images = 0;
        let (mut sum, mut nonempty) = (0.0, 0usize);
        for (f, (imgs, outs)) in folds.iter().zip(outcomes).enumerate() {
            let correct = outs.iter().filter(|o| **o == Outcome::Correct).count();
            for (img, o) in imgs.iter().zip(outs) {
                if *o == Outcome::Missing {
                    missing.push((f, img.id.clone()));
                }
            }
            images += outs.len();
            let acc = if outs.is_empty() {
                0.0
            } else {
                correct as f64 / outs.len() as f64
            };
            if !outs.is_empty() {
                sum += acc;
                nonempty += 1;
            }
            per_fold.push(acc);
        }
        let mean = if nonempty == 0 {
            0.0
        } else {
            sum / nonempty as f64
        };
        Self {
            config,
            per_fold,
            mean,
            images,
            missing,
        }
    }
}

/// Fraction of images whose top-1 candidate passes the rectangle metric,
/// per fold and averaged over folds.
pub fn top1_accuracy(folds: &[Vec<ImageEval>], cfg: &EvalConfig) -> AccuracyReport {
    let outcomes: Vec<Vec<Outcome>> = folds
        .iter()
        .map(|imgs| imgs.iter().map(|i| score_image(i, cfg)).collect())
        .collect();
    AccuracyReport::from_outcomes(folds, &outcomes, *cfg)
}

/// Mean top-1 accuracy for every (Jaccard, angle) threshold pair; rows
/// follow `jaccard`, columns follow `angle`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub jaccard: Vec<f64>,
    pub angle: Vec<f64>,
    pub accuracy: Vec<Vec<f64>>,
}

pub fn threshold_sweep(folds: &[Vec<ImageEval>], jaccard: &[f64], angle: &[f64]) -> SweepTable {
    let accuracy = jaccard
        .iter()
        .map(|&j| {
            angle
                .iter()
                .map(|&a| {
                    top1_accuracy(
                        folds,
                        &EvalConfig {
                            jaccard_threshold: j,
                            angle_threshold: a,
                        },
                    )
                    .mean
                })
                .collect()
        })
        .collect();
    SweepTable {
        jaccard: jaccard.to_vec(),
        angle: angle.to_vec(),
        accuracy,
    }
}
