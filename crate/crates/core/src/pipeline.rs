//! From detections and a depth image to a grasp in robot coordinates.
//!
//! The steps: keep confident candidates, estimate the object center from the
//! extremes of candidate centers, take the candidate nearest that center,
//! find the closest-to-camera pixel inside it, average surface normals around
//! that pixel, and map point and direction through the camera→robot
//! calibration.
//!
//! Pixel `(u, v)` covers `[u, u+1) × [v, v+1)` of the image plane, so its
//! center sits at `(u + 0.5, v + 0.5)`; intrinsics use the same frame.

use alloc::vec::Vec;

use crate::anchor::AnchorGrid;
use crate::data::DepthMap;
use crate::eval::{multi_grasps, GraspCandidate};
use crate::geom::Point;
use crate::loss::DetectionTensor;
use crate::math;

pub const SCORE_THRESHOLD: f64 = 0.5;
pub const NORMAL_RADIUS: usize = 5;
/// Fraction of the disc that must yield a normal.
pub const MIN_VALID_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("no grasp found")]
    NoGrasp,
    #[error("no candidates to choose from")]
    NoCandidates,
    #[error("no valid depth inside the chosen rectangle")]
    NoDepthInRect,
    #[error("only {valid} of {needed} neighborhood pixels yield a surface normal")]
    SparseNormals { valid: usize, needed: usize },
    #[error("calibration points are coplanar or repeated (|det| = {det:e})")]
    DegenerateCalibration { det: f64 },
    #[error("detection tensor does not match the anchor grid")]
    ShapeMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Camera-frame point (meters) seen at pixel `(u, v)` with depth `z`.
    pub fn back_project(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        [
            (u + 0.5 - self.cx) * z / self.fx,
            (v + 0.5 - self.cy) * z / self.fy,
            z,
        ]
    }

    /// Viewing ray through pixel `(u, v)`, scaled to unit depth.
    pub fn ray(&self, u: f64, v: f64) -> [f64; 3] {
        self.back_project(u, v, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub map: DepthMap,
    pub intrinsics: Intrinsics,
}

impl DepthImage {
    pub fn point(&self, u: usize, v: usize) -> Option<[f64; 3]> {
        self.map
            .at(u, v)
            .map(|z| self.intrinsics.back_project(u as f64, v as f64, z))
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: [f64; 3]) -> f64 {
    math::sqrt(dot(a, a))
}

fn normalized(a: [f64; 3]) -> Option<[f64; 3]> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| [a[0] / n, a[1] / n, a[2] / n])
}

/// Angle between two directions, degrees.
pub fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    math::acos(c.clamp(-1.0, 1.0)).to_degrees()
}

/// Candidates with score above 0.5, order kept.
pub fn select_candidates(cands: &[GraspCandidate]) -> Result<Vec<GraspCandidate>, PipelineError> {
    let kept: Vec<GraspCandidate> = cands
        .iter()
        .filter(|c| c.score > SCORE_THRESHOLD)
        .copied()
        .collect();
    if kept.is_empty() {
        Err(PipelineError::NoGrasp)
    } else {
        Ok(kept)
    }
}

/// Midpoint of the extreme candidate centers on each axis.
pub fn estimate_center(cands: &[GraspCandidate]) -> Result<Point, PipelineError> {
    if cands.is_empty() {
        return Err(PipelineError::NoCandidates);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for c in cands {
        x0 = x0.min(c.rect.x());
        x1 = x1.max(c.rect.x());
        y0 = y0.min(c.rect.y());
        y1 = y1.max(c.rect.y());
    }
    Ok(Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
}

/// Candidate whose center is nearest `center`; ties go to the higher score,
/// then to the earlier candidate.
pub fn choose_grasp(
    cands: &[GraspCandidate],
    center: Point,
) -> Result<GraspCandidate, PipelineError> {
    let d2 = |c: &GraspCandidate| {
        let (dx, dy) = (c.rect.x() - center.x, c.rect.y() - center.y);
        dx * dx + dy * dy
    };
    cands
        .iter()
        .reduce(|best, c| {
            let (db, dc) = (d2(best), d2(c));
            if dc < db || (dc == db && c.score > best.score) {
                c
            } else {
                best
            }
        })
        .copied()
        .ok_or(PipelineError::NoCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPixel {
    pub u: usize,
    pub v: usize,
    pub depth: f64,
}

/// Valid pixel with the smallest depth whose center lies in `rect`; ties go
/// to the pixel nearest the rectangle center, then to raster order.
pub fn grasp_point(
    rect: &crate::geom::RotatedRect,
    depth: &DepthImage,
) -> Result<GraspPixel, PipelineError> {
    let (w, h) = (depth.map.width(), depth.map.height());
    let r = 0.5 * math::hypot(rect.w(), rect.h());
    let clamp = |v: f64, hi: usize| (v.max(0.0) as usize).min(hi);
    let (u0, u1) = (
        clamp(math::floor(rect.x() - r), w),
        clamp(math::floor(rect.x() + r) + 1.0, w),
    );
    let (v0, v1) = (
        clamp(math::floor(rect.y() - r), h),
        clamp(math::floor(rect.y() + r) + 1.0, h),
    );
    let mut best: Option<(f64, f64, GraspPixel)> = None;
    for v in v0..v1 {
        for u in u0..u1 {
            let Some(z) = depth.map.at(u, v) else {
                continue;
            };
            let c = Point::new(u as f64 + 0.5, v as f64 + 0.5);
            if !rect.contains(c, 1e-9) {
                continue;
            }
            let d = c.dist(rect.center());
            let better = match best {
                None => true,
                Some((bz, bd, _)) => z < bz || (z == bz && d < bd),
            };
            if better {
                best = Some((z, d, GraspPixel { u, v, depth: z }));
            }
        }
    }
    best.map(|(_, _, p)| p).ok_or(PipelineError::NoDepthInRect)
}

/// Unit normal at one pixel from central differences of back-projected
/// neighbors, facing the camera (negative z).
pub fn pixel_normal(depth: &DepthImage, u: usize, v: usize) -> Option<[f64; 3]> {
    if u == 0 || v == 0 || u + 1 >= depth.map.width() || v + 1 >= depth.map.height() {
        return None;
    }
    depth.point(u, v)?;
    let du = sub(depth.point(u + 1, v)?, depth.point(u - 1, v)?);
    let dv = sub(depth.point(u, v + 1)?, depth.point(u, v - 1)?);
    let n = normalized(cross(du, dv))?;
    Some(if n[2] > 0.0 { [-n[0], -n[1], -n[2]] } else { n })
}

/// Mean of pixel normals over the disc of `radius` pixels around `(u, v)`,
/// renormalized.
pub fn grasp_vector(
    u: usize,
    v: usize,
    depth: &DepthImage,
    radius: usize,
) -> Result<[f64; 3], PipelineError> {
    let r = radius as isize;
    let mut sum = [0.0; 3];
    let (mut total, mut valid) = (0usize, 0usize);
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            total += 1;
            let (pu, pv) = (u as isize + dx, v as isize + dy);
            if pu < 0 || pv < 0 {
                continue;
            }
            if let Some(n) = pixel_normal(depth, pu as usize, pv as usize) {
                sum = [sum[0] + n[0], sum[1] + n[1], sum[2] + n[2]];
                valid += 1;
            }
        }
    }
    let needed = math_ceil_frac(total, MIN_VALID_FRACTION);
    if valid < needed || valid == 0 {
        return Err(PipelineError::SparseNormals { valid, needed });
    }
    normalized(sum).ok_or(PipelineError::SparseNormals { valid: 0, needed })
}

fn math_ceil_frac(total: usize, frac: f64) -> usize {
    let x = total as f64 * frac;
    let f = math::floor(x);
    if f < x {
        f as usize + 1
    } else {
        f as usize
    }
}

/// Affine camera→robot map `r = A·c + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTransform {
    pub linear: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl CalibrationTransform {
    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    fn mul(&self, p: [f64; 3]) -> [f64; 3] {
        let a = &self.linear;
        [dot(a[0], p), dot(a[1], p), dot(a[2], p)]
    }

    pub fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        let q = self.mul(p);
        [
            q[0] + self.translation[0],
            q[1] + self.translation[1],
            q[2] + self.translation[2],
        ]
    }

    /// Directions use the linear part only, renormalized.
    pub fn apply_direction(&self, d: [f64; 3]) -> Option<[f64; 3]> {
        normalized(self.mul(d))
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    dot(m[0], cross(m[1], m[2]))
}

/// Exact affine solve from four camera↔robot correspondences.
pub fn calibrate(pairs: &[([f64; 3], [f64; 3]); 4]) -> Result<CalibrationTransform, PipelineError> {
    let (c0, r0) = pairs[0];
    // Columns are offsets from the first point.
    let dc: [[f64; 3]; 3] = core::array::from_fn(|i| sub(pairs[i + 1].0, c0));
    let dr: [[f64; 3]; 3] = core::array::from_fn(|i| sub(pairs[i + 1].1, r0));
    // C has the camera offsets as columns; C = dcᵀ. det(C) = det(dc).
    let det = det3(&dc);
    let scale = dc.iter().map(|v| norm(*v)).product::<f64>();
    if det.is_nan() || det.abs() <= 1e-12 * scale || scale == 0.0 {
        return Err(PipelineError::DegenerateCalibration { det });
    }
    // Rows of C⁻¹ are cross products of C's columns over det.
    let inv_rows = [
        cross(dc[1], dc[2]).map(|v| v / det),
        cross(dc[2], dc[0]).map(|v| v / det),
        cross(dc[0], dc[1]).map(|v| v / det),
    ];
    // A = R · C⁻¹ where R has the robot offsets as columns.
    let mut linear = [[0.0; 3]; 3];
    for (row, out) in linear.iter_mut().enumerate() {
        for (col, cell) in out.iter_mut().enumerate() {
            *cell = (0..3).map(|j| dr[j][row] * inv_rows[j][col]).sum();
        }
    }
    let mut t = CalibrationTransform {
        linear,
        translation: [0.0; 3],
    };
    let mapped = t.mul(c0);
    t.translation = sub(r0, mapped);
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPlan {
    /// Robot frame, meters.
    pub point: [f64; 3],
    /// Unit approach direction, robot frame.
    pub approach: [f64; 3],
    /// Gripper rotation, degrees.
    pub theta: f64,
    pub score: f64,
    pub candidate: GraspCandidate,
    pub pixel: GraspPixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Detect,
    Select,
    Center,
    Choose,
    Point,
    Vector,
    Transform,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Detect => "detect",
            Stage::Select => "select",
            Stage::Center => "center",
            Stage::Choose => "choose",
            Stage::Point => "point",
            Stage::Vector => "vector",
            Stage::Transform => "transform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} stage failed: {source}", stage.name())]
pub struct PlanError {
    pub stage: Stage,
    pub source: PipelineError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    pub normal_radius: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            normal_radius: NORMAL_RADIUS,
        }
    }
}

/// Full pipeline; `on_stage` is called after each stage completes.
pub fn plan_grasp_with<F: FnMut(Stage)>(
    tensor: &DetectionTensor,
    grid: &AnchorGrid,
    depth: &DepthImage,
    calib: &CalibrationTransform,
    cfg: &PlanConfig,
    mut on_stage: F,
) -> Result<GraspPlan, PlanError> {
    let fail = |stage| move |source| PlanError { stage, source };
    if !tensor.matches_grid(grid) {
        return Err(PlanError {
            stage: Stage::Detect,
            source: PipelineError::ShapeMismatch,
        });
    }
    let detections = multi_grasps(tensor, grid, SCORE_THRESHOLD);
    on_stage(Stage::Detect);
    let cands = select_candidates(&detections).map_err(fail(Stage::Select))?;
    on_stage(Stage::Select);
    let center = estimate_center(&cands).map_err(fail(Stage::Center))?;
    on_stage(Stage::Center);
    let chosen = choose_grasp(&cands, center).map_err(fail(Stage::Choose))?;
    on_stage(Stage::Choose);
    let pixel = grasp_point(&chosen.rect, depth).map_err(fail(Stage::Point))?;
    on_stage(Stage::Point);
    let normal =
        grasp_vector(pixel.u, pixel.v, depth, cfg.normal_radius).map_err(fail(Stage::Vector))?;
    on_stage(Stage::Vector);
    let cam = depth
        .intrinsics
        .back_project(pixel.u as f64, pixel.v as f64, pixel.depth);
    let approach = calib.apply_direction(normal).ok_or(PlanError {
        stage: Stage::Transform,
        source: PipelineError::DegenerateCalibration { det: 0.0 },
    })?;
    let plan = GraspPlan {
        point: calib.apply_point(cam),
        approach,
        theta: chosen.rect.theta(),
        score: chosen.score,
        candidate: chosen,
        pixel,
    };
    on_stage(Stage::Transform);
    Ok(plan)
}

pub fn plan_grasp(
    tensor: &DetectionTensor,
    grid: &AnchorGrid,
    depth: &DepthImage,
    calib: &CalibrationTransform,
    cfg: &PlanConfig,
) -> Result<GraspPlan, PlanError> {
    plan_grasp_with(tensor, grid, depth, calib, cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Raster;
    use crate::geom::RotatedRect;
    use std::vec;

    fn cand(x: f64, y: f64, score: f64) -> GraspCandidate {
        GraspCandidate {
            rect: RotatedRect::new(x, y, 20.0, 10.0, 0.0).unwrap(),
            score,
            anchor: None,
        }
    }

    fn intr(w: usize, h: usize) -> Intrinsics {
        Intrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: w as f64 / 2.0,
            cy: h as f64 / 2.0,
        }
    }

    fn flat(w: usize, h: usize, z: f64) -> DepthImage {
        DepthImage {
            map: DepthMap::dense(Raster::filled(w, h, z)),
            intrinsics: intr(w, h),
        }
    }

    #[test]
    fn selection() {
        let c = [cand(0.0, 0.0, 0.9), cand(1.0, 1.0, 0.4)];
        assert_eq!(select_candidates(&c).unwrap(), [c[0]]);
        assert_eq!(
            select_candidates(&[cand(0.0, 0.0, 0.5)]),
            Err(PipelineError::NoGrasp)
        );
        let all = [cand(0.0, 0.0, 0.6), cand(1.0, 1.0, 0.7)];
        assert_eq!(select_candidates(&all).unwrap(), all);
    }

    #[test]
    fn center_from_extremes() {
        assert_eq!(
            estimate_center(&[cand(0.0, 0.0, 0.9), cand(2.0, 4.0, 0.9)]).unwrap(),
            Point::new(1.0, 2.0)
        );
        assert_eq!(
            estimate_center(&[cand(3.0, 7.0, 0.9)]).unwrap(),
            Point::new(3.0, 7.0)
        );
        let three = [
            cand(0.0, 0.0, 0.9),
            cand(1.0, 9.0, 0.9),
            cand(2.0, 4.0, 0.9),
        ];
        assert_eq!(estimate_center(&three).unwrap(), Point::new(1.0, 4.5));
        let mut dup = three.to_vec();
        dup.reverse();
        dup.push(three[1]);
        assert_eq!(estimate_center(&dup).unwrap(), Point::new(1.0, 4.5));
        assert_eq!(estimate_center(&[]), Err(PipelineError::NoCandidates));
    }

    #[test]
    fn choose_nearest_then_score() {
        let c = [cand(0.0, 0.0, 0.6), cand(5.0, 5.0, 0.9)];
        assert_eq!(choose_grasp(&c, Point::new(1.0, 1.0)).unwrap(), c[0]);
        let tie = [cand(0.0, 0.0, 0.6), cand(2.0, 2.0, 0.9)];
        assert_eq!(choose_grasp(&tie, Point::new(1.0, 1.0)).unwrap(), tie[1]);
        assert_eq!(choose_grasp(&c[..1], Point::new(9.0, 9.0)).unwrap(), c[0]);
    }

    #[test]
    fn flat_plane_point_is_rect_center() {
        let d = flat(64, 64, 0.7);
        let rect = RotatedRect::new(30.5, 20.5, 12.0, 6.0, 30.0).unwrap();
        let p = grasp_point(&rect, &d).unwrap();
        assert_eq!((p.u, p.v), (30, 20));
    }

    #[test]
    fn bump_is_found() {
        let mut d = flat(64, 64, 0.7);
        d.map.depth.set(33, 22, 0.65);
        let rect = RotatedRect::new(30.0, 20.0, 12.0, 6.0, 30.0).unwrap();
        let p = grasp_point(&rect, &d).unwrap();
        assert_eq!((p.u, p.v, p.depth), (33, 22, 0.65));
    }

    #[test]
    fn empty_rect_region_errors() {
        let mut d = flat(16, 16, 0.7);
        d.map.valid = Raster::filled(16, 16, false);
        let rect = RotatedRect::new(8.0, 8.0, 4.0, 4.0, 0.0).unwrap();
        assert_eq!(grasp_point(&rect, &d), Err(PipelineError::NoDepthInRect));
    }

    #[test]
    fn flat_plane_normal_faces_camera() {
        let d = flat(64, 64, 0.7);
        let n = grasp_vector(32, 32, &d, 5).unwrap();
        assert!(angle_between(n, [0.0, 0.0, -1.0]) < 1e-6);
        assert!((norm(n) - 1.0).abs() < 1e-9);
    }

    fn depth_from<F: Fn(f64, f64) -> Option<f64>>(w: usize, h: usize, z: F) -> DepthImage {
        let intrinsics = intr(w, h);
        let mut values = vec![];
        for v in 0..h {
            for u in 0..w {
                let r = intrinsics.ray(u as f64, v as f64);
                values.push(z(r[0], r[1]).unwrap_or(f64::NAN));
            }
        }
        DepthImage {
            map: DepthMap::from_values(w, h, values),
            intrinsics,
        }
    }

    #[test]
    fn tilted_plane_normal() {
        // Plane n·P = d with n tilted 30° about the y axis.
        let (s, c) = (0.5, 3f64.sqrt() / 2.0);
        let d = depth_from(64, 64, |a, _| Some(0.8 * c / (c - s * a)));
        let n = grasp_vector(32, 32, &d, 5).unwrap();
        assert!(angle_between(n, [s, 0.0, -c]) < 1e-6, "{n:?}");
        assert!((angle_between(n, [0.0, 0.0, -1.0]) - 30.0).abs() < 1e-6);
    }

    fn sphere_depth(a: f64, b: f64, center: [f64; 3], r: f64) -> Option<f64> {
        // First hit of the ray t·(a, b, 1); depth is t.
        let dir = [a, b, 1.0];
        let qa = dot(dir, dir);
        let qb = -2.0 * dot(dir, center);
        let qc = dot(center, center) - r * r;
        let disc = qb * qb - 4.0 * qa * qc;
        (disc >= 0.0).then(|| (-qb - math::sqrt(disc)) / (2.0 * qa))
    }

    #[test]
    fn sphere_cap_normal() {
        let (center, r) = ([0.0, 0.0, 1.0], 0.3);
        let d = depth_from(96, 96, |a, b| sphere_depth(a, b, center, r));
        for (u, v) in [(48, 48), (60, 40), (30, 55)] {
            let p = d.point(u, v).unwrap();
            let exact = sub(p, center).map(|x| x / r);
            let n = grasp_vector(u, v, &d, 5).unwrap();
            assert!(
                angle_between(n, exact) < 0.5,
                "({u}, {v}): {}",
                angle_between(n, exact)
            );
        }
    }

    #[test]
    fn mirrored_depth_mirrors_normal() {
        let (center, r) = ([0.02, -0.01, 1.0], 0.3);
        let a = depth_from(64, 64, |x, y| sphere_depth(x, y, center, r));
        let b = depth_from(64, 64, |x, y| sphere_depth(-x, y, center, r));
        for (u, v) in [(20, 30), (40, 25)] {
            let na = grasp_vector(u, v, &a, 5).unwrap();
            let nb = grasp_vector(63 - u, v, &b, 5).unwrap();
            assert!(norm(sub(na, [-nb[0], nb[1], nb[2]])) < 1e-9);
        }
    }

    #[test]
    fn sparse_neighborhood_errors() {
        let mut d = flat(64, 64, 0.7);
        for v in 0..64 {
            for u in 0..64 {
                if (u + v) % 3 != 0 {
                    d.map.valid.set(u, v, false);
                }
            }
        }
        assert!(matches!(
            grasp_vector(32, 32, &d, 5),
            Err(PipelineError::SparseNormals { .. })
        ));
    }

    #[test]
    fn calibration_identity_and_translation() {
        let pts = [
            [0.0, 0.0, 0.5],
            [0.15, 0.0, 0.5],
            [0.0, 0.15, 0.5],
            [0.15, 0.15, 0.65],
        ];
        let same = pts.map(|p| (p, p));
        let t = calibrate(&same).unwrap();
        for (i, row) in t.linear.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(norm(t.translation) < 1e-12);
        let moved = pts.map(|p| (p, [p[0] + 1.0, p[1] + 2.0, p[2] + 3.0]));
        let t = calibrate(&moved).unwrap();
        assert!(norm(sub(t.translation, [1.0, 2.0, 3.0])) < 1e-12);
    }

    #[test]
    fn coplanar_calibration_is_rejected() {
        let pts = [
            [0.0, 0.0, 0.5],
            [0.15, 0.0, 0.5],
            [0.0, 0.15, 0.5],
            [0.15, 0.15, 0.5],
        ];
        assert!(matches!(
            calibrate(&pts.map(|p| (p, p))),
            Err(PipelineError::DegenerateCalibration { .. })
        ));
        let repeated = [pts[0], pts[0], pts[1], pts[2]];
        assert!(calibrate(&repeated.map(|p| (p, p))).is_err());
    }

    fn one_candidate_tensor(grid: &AnchorGrid, anchor: usize) -> DetectionTensor {
        let mut t = DetectionTensor::zeros(grid.n(), grid.k());
        for a in 0..t.anchors() {
            t.set_logits(a, -3.0, 3.0);
        }
        t.set_logits(anchor, 3.0, -3.0);
        t
    }

    #[test]
    fn plan_on_flat_plane() {
        let grid = AnchorGrid::new(320, 32, 4).unwrap();
        let anchor = grid.index(4, 6, 2);
        let tensor = one_candidate_tensor(&grid, anchor);
        let depth = flat(320, 320, 0.8);
        let plan = plan_grasp(
            &tensor,
            &grid,
            &depth,
            &CalibrationTransform::identity(),
            &PlanConfig::default(),
        )
        .unwrap();
        assert_eq!(plan.candidate.anchor, Some(anchor));
        // Anchor center (208, 144) is a pixel corner; nearest centers tie and
        // the raster-first one wins.
        assert_eq!((plan.pixel.u, plan.pixel.v), (207, 143));
        assert!(angle_between(plan.approach, [0.0, 0.0, -1.0]) < 1e-6);
        assert_eq!(plan.theta, grid.get(anchor).theta);
        let expected = depth.intrinsics.back_project(207.0, 143.0, 0.8);
        assert!(norm(sub(plan.point, expected)) < 1e-12);
    }

    #[test]
    fn plan_without_confident_anchor() {
        let grid = AnchorGrid::new(320, 32, 4).unwrap();
        let tensor = DetectionTensor::zeros(grid.n(), grid.k());
        let err = plan_grasp(
            &tensor,
            &grid,
            &flat(320, 320, 0.8),
            &CalibrationTransform::identity(),
            &PlanConfig::default(),
        )
        .unwrap_err();
        assert_eq!(
            err,
            PlanError {
                stage: Stage::Select,
                source: PipelineError::NoGrasp
            }
        );
    }

    #[test]
    fn plan_shifts_with_translation() {
        let grid = AnchorGrid::new(320, 32, 4).unwrap();
        let tensor = one_candidate_tensor(&grid, grid.index(2, 2, 0));
        let depth = flat(320, 320, 0.8);
        let base = plan_grasp(
            &tensor,
            &grid,
            &depth,
            &CalibrationTransform::identity(),
            &PlanConfig::default(),
        )
        .unwrap();
        let shifted = CalibrationTransform {
            translation: [0.1, -0.2, 0.3],
            ..CalibrationTransform::identity()
        };
        let moved = plan_grasp(&tensor, &grid, &depth, &shifted, &PlanConfig::default()).unwrap();
        assert!(norm(sub(sub(moved.point, base.point), [0.1, -0.2, 0.3])) < 1e-12);
        assert_eq!(moved.approach, base.approach);
        let mut stages = vec![];
        plan_grasp_with(
            &tensor,
            &grid,
            &depth,
            &shifted,
            &PlanConfig::default(),
            |s| stages.push(s),
        )
        .unwrap();
        assert_eq!(stages.len(), 7);
    }
}
