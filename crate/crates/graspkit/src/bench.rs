//! Angle vs Jaccard matching benchmark: mean angle difference and IoU over
//! matched pairs, and median wall-clock matching time.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use graspkit_core::matching::{run, summarize, MatchAssignment, Strategy};
use graspkit_core::{AnchorGrid, RotatedRect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::formats::fmt6;

pub const CSV_HEADER: &str =
    "strategy,k,stride,mean_angle_diff_deg,mean_iou,t_match_ms,t_match_ratio";
pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchStats {
    pub strategy: Strategy,
    pub k: usize,
    pub stride: u32,
    /// `None` when the strategy found no positive pair.
    pub mean_angle_diff: Option<f64>,
    pub mean_iou: Option<f64>,
    pub pairs: usize,
    /// Median milliseconds to match the whole batch once.
    pub t_match_ms: f64,
    /// `t_match_ms` over Angle Matching's.
    pub t_match_ratio: f64,
}

impl MatchStats {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), fmt6);
        format!(
            "{},{},{},{},{},{},{}",
            self.strategy.label(),
            self.k,
            self.stride,
            opt(self.mean_angle_diff),
            opt(self.mean_iou),
            fmt6(self.t_match_ms),
            fmt6(self.t_match_ratio)
        )
    }
}

pub fn write_csv<W: Write>(mut w: W, rows: &[MatchStats]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Random ground truths: centers uniform over the image, angles uniform on
/// (−90, 90], sides scaled to the anchor size.
pub fn synthetic_scenes(
    grid: &AnchorGrid,
    scenes: usize,
    per_scene: usize,
    seed: u64,
) -> Vec<Vec<RotatedRect>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = grid.input_size() as f64;
    let side = graspkit_core::anchor::anchor_side(grid.stride());
    (0..scenes)
        .map(|_| {
            (0..per_scene)
                .map(|_| {
                    let x = rng.random_range(0.0..size);
                    let y = rng.random_range(0.0..size);
                    let w = rng.random_range(0.8 * side..1.6 * side);
                    let h = rng.random_range(0.4 * side..0.9 * side);
                    // random_range excludes the upper end; flip to (−90, 90].
                    let theta = -rng.random_range(-90.0..90.0);
                    RotatedRect::new(x, y, w, h, theta).expect("positive sizes")
                })
                .collect()
        })
        .collect()
}

/// Median of `reps` timings of `f`, in milliseconds, after `warmup` calls.
pub fn median_ms<T>(reps: usize, warmup: usize, mut f: impl FnMut() -> T) -> f64 {
    for _ in 0..warmup {
        black_box(f());
    }
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            black_box(f());
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    }
}

/// Matches every scene once.
pub fn match_batch(
    strategy: Strategy,
    grid: &AnchorGrid,
    scenes: &[Vec<RotatedRect>],
) -> Vec<MatchAssignment> {
    scenes.iter().map(|g| run(strategy, grid, g)).collect()
}

/// Stats for Angle then Jaccard matching. Quality statistics use the
/// current rayon pool; timing runs on the calling thread only.
pub fn bench_match(grid: &AnchorGrid, scenes: &[Vec<RotatedRect>], reps: usize) -> [MatchStats; 2] {
    let reps = reps.max(MIN_REPS);
    let warmup = (reps / 10).max(3);
    let stats = |strategy: Strategy| {
        let assignments: Vec<MatchAssignment> =
            scenes.par_iter().map(|g| run(strategy, grid, g)).collect();
        let summary = summarize(
            grid,
            assignments
                .iter()
                .zip(scenes)
                .map(|(a, g)| (a, g.as_slice())),
        );
        let t = median_ms(reps, warmup, || match_batch(strategy, grid, scenes));
        (summary, t)
    };
    let (am, t_am) = stats(Strategy::Angle);
    let (jm, t_jm) = stats(Strategy::Jaccard);
    let row = |strategy, s: Option<graspkit_core::matching::MatchSummary>, t: f64| MatchStats {
        strategy,
        k: grid.k(),
        stride: grid.stride(),
        mean_angle_diff: s.map(|s| s.mean_angle_diff),
        mean_iou: s.map(|s| s.mean_iou),
        pairs: s.map_or(0, |s| s.pairs),
        t_match_ms: t,
        t_match_ratio: t / t_am,
    };
    [
        row(Strategy::Angle, am, t_am),
        row(Strategy::Jaccard, jm, t_jm),
    ]
}

/// Shifts ground truths into a centered `size × size` crop of a
/// `width × height` image, dropping those whose center leaves it.
pub fn center_crop(
    gts: &[RotatedRect],
    width: usize,
    height: usize,
    size: usize,
) -> Vec<RotatedRect> {
    let dx = (size as f64 - width as f64) / 2.0;
    let dy = (size as f64 - height as f64) / 2.0;
    gts.iter()
        .filter_map(|g| g.translated(dx, dy).ok())
        .filter(|g| (0.0..size as f64).contains(&g.x()) && (0.0..size as f64).contains(&g.y()))
        .collect()
}
