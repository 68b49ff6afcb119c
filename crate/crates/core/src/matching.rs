//! Positive-anchor assignment: Angle Matching, Jaccard Index Matching, and
//! hard-negative mining.

use alloc::vec;
use alloc::vec::Vec;

use crate::anchor::{angle_scale, AnchorGrid};
use crate::geom::{angle_diff, jaccard, RotatedRect};

/// Negatives kept per image when nothing matched.
pub const EMPTY_IMAGE_NEGATIVES: usize = 16;

/// Default negative : positive ratio for hard mining.
pub const HARD_NEGATIVE_RATIO: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Angle,
    Jaccard,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Angle => "AM",
            Strategy::Jaccard => "JM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub anchor: usize,
    pub gt: usize,
    /// Period-aware angle between anchor and ground truth, degrees.
    pub angle_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchAssignment {
    /// One entry per positive anchor, sorted by anchor index.
    pub pairs: Vec<MatchedPair>,
    /// Ground truths whose center lies outside the image.
    pub skipped: Vec<usize>,
}

impl MatchAssignment {
    /// Number of positive anchors.
    pub fn positives(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_positive(&self, anchor: usize) -> bool {
        self.pairs
            .binary_search_by_key(&anchor, |p| p.anchor)
            .is_ok()
    }

    /// Jaccard index of every pair, in pair order.
    pub fn ious(&self, grid: &AnchorGrid, gts: &[RotatedRect]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|p| jaccard(&grid.get(p.anchor).rect(), &gts[p.gt]))
            .collect()
    }

    fn from_best(best: Vec<Option<MatchedPair>>, skipped: Vec<usize>) -> Self {
        Self {
            pairs: best.into_iter().flatten().collect(),
            skipped,
        }
    }
}

/// Each in-image ground truth goes to the anchor of its own cell whose angle
/// is nearest; exact ties take the lower anchor index.
///
/// Several ground truths may land on one anchor: the anchor keeps the one with
/// the smallest angle difference (lower ground-truth index on ties).
pub fn angle_match(grid: &AnchorGrid, gts: &[RotatedRect]) -> MatchAssignment {
    let mut best: Vec<Option<MatchedPair>> = vec![None; grid.len()];
    let mut skipped = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        let Some(anchor) = angle_anchor(grid, g) else {
            skipped.push(gi);
            continue;
        };
        let diff = angle_diff(g.theta(), grid.get(anchor).theta);
        let slot = &mut best[anchor];
        if slot.is_none_or(|p| diff < p.angle_diff) {
            *slot = Some(MatchedPair {
                anchor,
                gt: gi,
                angle_diff: diff,
            });
        }
    }
    MatchAssignment::from_best(best, skipped)
}

/// Anchor chosen for one ground truth by Angle Matching, if its center is
/// inside the image.
pub fn angle_anchor(grid: &AnchorGrid, g: &RotatedRect) -> Option<usize> {
    let (row, col) = grid.cell_of(g.x(), g.y())?;
    let base = grid.index(row, col, 0);
    let mut chosen = base;
    let mut chosen_diff = f64::INFINITY;
    for (m, a) in grid.boxes()[base..base + grid.k()].iter().enumerate() {
        let d = angle_diff(g.theta(), a.theta);
        if d < chosen_diff {
            chosen = base + m;
            chosen_diff = d;
        }
    }
    Some(chosen)
}

/// Largest angle residual Angle Matching can produce for `k` anchors per cell.
pub fn angle_bound(k: usize) -> f64 {
    angle_scale(k)
}

/// An anchor is positive iff its rotated IoU with some in-image ground truth
/// exceeds `threshold`; it records its best-IoU ground truth.
pub fn jaccard_match(grid: &AnchorGrid, gts: &[RotatedRect], threshold: f64) -> MatchAssignment {
    let size = grid.input_size() as f64;
    let mut skipped = Vec::new();
    let mut inside = Vec::with_capacity(gts.len());
    for (gi, g) in gts.iter().enumerate() {
        if g.x() >= 0.0 && g.y() >= 0.0 && g.x() < size && g.y() < size {
            inside.push(gi);
        } else {
            skipped.push(gi);
        }
    }
    let mut best: Vec<Option<MatchedPair>> = vec![None; grid.len()];
    for (ai, a) in grid.boxes().iter().enumerate() {
        let ar = a.rect();
        let mut top: Option<(usize, f64)> = None;
        for &gi in &inside {
            let iou = jaccard(&ar, &gts[gi]);
            if iou > threshold && top.is_none_or(|(_, t)| iou > t) {
                top = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = top {
            best[ai] = Some(MatchedPair {
                anchor: ai,
                gt: gi,
                angle_diff: angle_diff(gts[gi].theta(), a.theta),
            });
        }
    }
    MatchAssignment::from_best(best, skipped)
}

pub fn run(strategy: Strategy, grid: &AnchorGrid, gts: &[RotatedRect]) -> MatchAssignment {
    match strategy {
        Strategy::Angle => angle_match(grid, gts),
        Strategy::Jaccard => jaccard_match(grid, gts, 0.5),
    }
}

/// Means over every positive pair of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchSummary {
    pub mean_angle_diff: f64,
    pub mean_iou: f64,
    pub pairs: usize,
}

/// Averages angle difference and IoU over all pairs; `None` without pairs.
pub fn summarize<'a, I>(grid: &AnchorGrid, batch: I) -> Option<MatchSummary>
where
    I: IntoIterator<Item = (&'a MatchAssignment, &'a [RotatedRect])>,
{
    let mut angle_sum = 0.0;
    let mut iou_sum = 0.0;
    let mut pairs = 0usize;
    for (assignment, gts) in batch {
        for (pair, iou) in assignment.pairs.iter().zip(assignment.ious(grid, gts)) {
            angle_sum += pair.angle_diff;
            iou_sum += iou;
            pairs += 1;
        }
    }
    (pairs > 0).then(|| MatchSummary {
        mean_angle_diff: angle_sum / pairs as f64,
        mean_iou: iou_sum / pairs as f64,
        pairs,
    })
}

/// The `ratio · P` non-positive anchors with the highest graspable score,
/// hardest first; ties go to the lower index. With `P = 0` the top
/// [`EMPTY_IMAGE_NEGATIVES`] are returned.
pub fn hard_negatives(scores: &[f64], assignment: &MatchAssignment, ratio: usize) -> Vec<usize> {
    let p = assignment.positives();
    let quota = if p == 0 {
        EMPTY_IMAGE_NEGATIVES
    } else {
        ratio * p
    };
    let mut negatives: Vec<usize> = (0..scores.len())
        .filter(|&i| !assignment.is_positive(i))
        .collect();
    negatives.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    negatives.truncate(quota);
    negatives
}
