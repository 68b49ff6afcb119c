use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{DepthMap, Raster, RgbImage};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FuseError {
    #[error("RGB is {rgb:?} but depth is {depth:?}")]
    ShapeMismatch {
        rgb: (usize, usize),
        depth: (usize, usize),
    },
    #[error("depth image has no valid pixel")]
    NoValidDepth,
}

/// Replaces every invalid pixel by the value of the nearest valid pixel in
/// 4-connected steps. Ties go to whichever seed the breadth-first sweep
/// (seeded in raster order, visiting left, right, up, down) reaches first.
pub fn fill_invalid(depth: &DepthMap) -> Result<Raster<f64>, FuseError> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = depth.depth.clone();
    let mut done: Vec<bool> = depth.valid.data.clone();
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&i| done[i]).collect();
    if queue.is_empty() {
        return Err(FuseError::NoValidDepth);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let neighbors = [
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y > 0).then(|| i - w),
            (y + 1 < h).then(|| i + w),
        ];
        for j in neighbors.into_iter().flatten() {
            if !done[j] {
                done[j] = true;
                out.data[j] = out.data[i];
                queue.push_back(j);
            }
        }
    }
    Ok(out)
}

/// Replaces the blue channel with depth mapped linearly from the image's
/// valid range `[d_min, d_max]` onto `[0, 255]`. A flat depth range maps to 0.
pub fn fuse_rgd(rgb: &RgbImage, depth: &DepthMap) -> Result<RgbImage, FuseError> {
    if !rgb.same_shape(&depth.depth) || !rgb.same_shape(&depth.valid) {
        return Err(FuseError::ShapeMismatch {
            rgb: (rgb.width, rgb.height),
            depth: (depth.width(), depth.height()),
        });
    }
    let filled = fill_invalid(depth)?;
    let (lo, hi) = filled
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    let span = hi - lo;
    let data = rgb
        .data
        .iter()
        .zip(&filled.data)
        .map(|(px, &d)| {
            let level = if span > 0.0 {
                math::round(255.0 * (d - lo) / span)
            } else {
                0.0
            };
            [px[0], px[1], level.clamp(0.0, 255.0) as u8]
        })
        .collect();
    Ok(Raster {
        width: rgb.width,
        height: rgb.height,
        data,
    })
}
