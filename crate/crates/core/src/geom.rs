//! Rotated rectangles and the convex-clipping Jaccard index.
//!
//! Angles are in degrees throughout, measured from the +x axis towards +y of
//! the raster frame. Grasp rectangles are symmetric under a half-turn, so
//! every stored angle lives in the half-open interval (−90, 90].

use alloc::vec::Vec;

use crate::math;

/// Points closer than this to a clip line count as lying on it.
pub const CLIP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("rectangle side lengths must be positive and finite (w = {w}, h = {h})")]
    InvalidSize { w: f64, h: f64 },
    #[error("rectangle center and angle must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        math::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Wraps an angle into (−90, 90].
pub fn normalize_angle(deg: f64) -> f64 {
    let r = deg - 180.0 * math::floor((deg + 90.0) / 180.0);
    if r <= -90.0 {
        r + 180.0
    } else if r > 90.0 {
        r - 180.0
    } else {
        r
    }
}

/// Smallest difference between two orientations of period 180°, in [0, 90].
pub fn angle_diff(t1: f64, t2: f64) -> f64 {
    normalize_angle(t1 - t2).abs()
}

/// A grasp rectangle `(x, y, w, h, θ)`.
///
/// `w` runs along the direction `θ`, `h` along the perpendicular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl RotatedRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64, theta: f64) -> Result<Self, GeomError> {
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(GeomError::InvalidSize { w, h });
        }
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(Self {
            x,
            y,
            w,
            h,
            theta: normalize_angle(theta),
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same rectangle moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, GeomError> {
        Self::new(self.x + dx, self.y + dy, self.w, self.h, self.theta)
    }

    /// Unit vectors along the width and height axes.
    pub fn axes(&self) -> (Point, Point) {
        let (s, c) = math::sin_cos_deg(self.theta);
        (Point::new(c, s), Point::new(-s, c))
    }

    /// The four corners, counterclockwise (positive signed area).
    pub fn vertices(&self) -> [Point; 4] {
        let (u, v) = self.axes();
        let (hw, hh) = (0.5 * self.w, 0.5 * self.h);
        let corner = |su: f64, sv: f64| {
            Point::new(
                self.x + su * hw * u.x + sv * hh * v.x,
                self.y + su * hw * u.y + sv * hh * v.y,
            )
        };
        [
            corner(1.0, 1.0),
            corner(-1.0, 1.0),
            corner(-1.0, -1.0),
            corner(1.0, -1.0),
        ]
    }

    pub fn polygon(&self) -> Polygon {
        Polygon::from_vertices(self.vertices().to_vec())
    }

    /// Whether `p` lies in the closed rectangle, with `tol` slack on every side.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let (u, v) = self.axes();
        let (dx, dy) = (p.x - self.x, p.y - self.y);
        let a = dx * u.x + dy * u.y;
        let b = dx * v.x + dy * v.y;
        a.abs() <= 0.5 * self.w + tol && b.abs() <= 0.5 * self.h + tol
    }
}

/// Convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn from_vertices(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area; zero for fewer than three vertices.
    pub fn area(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let n = self.vertices.len();
        let mut twice = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            twice += a.x * b.y - b.x * a.y;
        }
        0.5 * twice.abs()
    }

    /// Sutherland–Hodgman clip of `self` against every edge of the convex,
    /// counterclockwise `clip` polygon.
    pub fn clip_convex(&self, clip: &Polygon) -> Polygon {
        let mut output = self.vertices.clone();
        let mut input = Vec::with_capacity(8);
        let m = clip.vertices.len();
        for i in 0..m {
            if output.is_empty() {
                break;
            }
            core::mem::swap(&mut input, &mut output);
            output.clear();
            clip_half_plane(
                &input,
                clip.vertices[i],
                clip.vertices[(i + 1) % m],
                &mut output,
            );
        }
        Polygon::from_vertices(output)
    }
}

fn clip_half_plane(input: &[Point], a: Point, b: Point, out: &mut Vec<Point>) {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len = math::hypot(ex, ey);
    if len == 0.0 {
        out.extend_from_slice(input);
        return;
    }
    // Signed distance, positive on the inner (left) side.
    let dist = |p: Point| (ex * (p.y - a.y) - ey * (p.x - a.x)) / len;
    let n = input.len();
    for i in 0..n {
        let cur = input[i];
        let next = input[(i + 1) % n];
        let dc = dist(cur);
        let dn = dist(next);
        let cur_in = dc >= -CLIP_EPS;
        if cur_in {
            out.push(cur);
        }
        // Crossing strictly through the band around the line.
        if (dc > CLIP_EPS && dn < -CLIP_EPS) || (dc < -CLIP_EPS && dn > CLIP_EPS) {
            let t = dc / (dc - dn);
            out.push(Point::new(
                cur.x + t * (next.x - cur.x),
                cur.y + t * (next.y - cur.y),
            ));
        }
    }
}

/// Area of `a ∩ b`, in [0, min(area(a), area(b))].
pub fn intersect_area(a: &RotatedRect, b: &RotatedRect) -> f64 {
    // Disjoint bounding circles cannot overlap.
    let ra = 0.5 * math::hypot(a.w, a.h);
    let rb = 0.5 * math::hypot(b.w, b.h);
    if a.center().dist(b.center()) >= ra + rb {
        return 0.0;
    }
    let clipped = a.polygon().clip_convex(&b.polygon());
    clipped.area().clamp(0.0, a.area().min(b.area()))
}

/// Intersection over union of two rotated rectangles.
pub fn jaccard(a: &RotatedRect, b: &RotatedRect) -> f64 {
    let inter = intersect_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    fn rect(x: f64, y: f64, w: f64, h: f64, t: f64) -> RotatedRect {
        RotatedRect::new(x, y, w, h, t).unwrap()
    }

    fn same_set(a: &[Point], b: &[Point], tol: f64) -> bool {
        a.len() == b.len()
            && a.iter().all(|p| b.iter().any(|q| p.dist(*q) < tol))
            && b.iter().all(|p| a.iter().any(|q| p.dist(*q) < tol))
    }

    #[test]
    fn normalize_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(90.0), 90.0);
        assert_eq!(normalize_angle(-90.0), 90.0);
        assert_eq!(normalize_angle(270.0), 90.0);
        assert_eq!(normalize_angle(100.0), -80.0);
        assert_eq!(normalize_angle(-100.0), 80.0);
        assert_eq!(normalize_angle(0.0), 0.0);
        assert_eq!(normalize_angle(179.0), -1.0);
    }

    #[test]
    fn construction_rejects_bad_sizes() {
        assert!(RotatedRect::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(RotatedRect::new(0.0, 0.0, 1.0, -1.0, 0.0).is_err());
        assert!(RotatedRect::new(f64::NAN, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(RotatedRect::new(0.0, 0.0, f64::INFINITY, 1.0, 0.0).is_err());
        assert_eq!(rect(0.0, 0.0, 1.0, 1.0, -90.0).theta(), 90.0);
    }

    #[test]
    fn vertices_of_unit_square() {
        let v = rect(0.0, 0.0, 1.0, 1.0, 0.0).vertices();
        let expected = [
            Point::new(0.5, 0.5),
            Point::new(-0.5, 0.5),
            Point::new(-0.5, -0.5),
            Point::new(0.5, -0.5),
        ];
        assert!(same_set(&v, &expected, 1e-12));
    }

    #[test]
    fn vertices_of_rotated_square() {
        let s = 2f64.sqrt();
        let v = rect(0.0, 0.0, s, s, 45.0).vertices();
        let expected = [
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
            Point::new(0.0, -1.0),
        ];
        assert!(same_set(&v, &expected, 1e-12));
    }

    #[test]
    fn square_vertices_repeat_every_quarter_turn() {
        let a = rect(3.0, 4.0, 2.0, 2.0, 90.0).vertices();
        let b = rect(3.0, 4.0, 2.0, 2.0, 0.0).vertices();
        assert!(same_set(&a, &b, 1e-12));
    }

    #[test]
    fn vertices_are_ccw_and_centered() {
        let r = rect(7.0, -2.0, 5.0, 3.0, 33.0);
        let v = r.vertices();
        let cx = v.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = v.iter().map(|p| p.y).sum::<f64>() / 4.0;
        assert!((cx - 7.0).abs() < 1e-12 && (cy + 2.0).abs() < 1e-12);
        let mut twice = 0.0;
        for i in 0..4 {
            twice += v[i].x * v[(i + 1) % 4].y - v[(i + 1) % 4].x * v[i].y;
        }
        assert!(twice > 0.0);
    }

    #[test]
    fn areas() {
        assert_eq!(rect(0.0, 0.0, 2.0, 3.0, 0.0).area(), 6.0);
        assert_eq!(rect(5.0, 5.0, 2.0, 3.0, 37.0).area(), 6.0);
        assert_eq!(rect(0.0, 0.0, 1.0, 1.0, -45.0).area(), 1.0);
        assert!((rect(5.0, 5.0, 2.0, 3.0, 37.0).polygon().area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn self_intersection_is_full_area() {
        let r = rect(10.0, 20.0, 7.0, 3.0, 21.0);
        assert!((intersect_area(&r, &r) - 21.0).abs() < 1e-9);
        assert!((jaccard(&r, &r) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_rectangles() {
        let a = rect(0.0, 0.0, 2.0, 2.0, 0.0);
        let b = rect(100.0, 0.0, 2.0, 2.0, 0.0);
        assert_eq!(intersect_area(&a, &b), 0.0);
        assert_eq!(jaccard(&a, &b), 0.0);
    }

    // Overlap is a regular octagon of inradius 1/2: area 2(√2 − 1).
    #[test]
    fn unit_square_against_its_45_degree_rotation() {
        let a = rect(0.0, 0.0, 1.0, 1.0, 0.0);
        let b = rect(0.0, 0.0, 1.0, 1.0, 45.0);
        assert!((intersect_area(&a, &b) - 2.0 * (core::f64::consts::SQRT_2 - 1.0)).abs() < 1e-12);
        assert!((jaccard(&a, &b) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn touching_edges_have_zero_area() {
        let a = rect(0.0, 0.0, 2.0, 2.0, 0.0);
        let b = rect(2.0, 0.0, 2.0, 2.0, 0.0);
        assert!(intersect_area(&a, &b) < 1e-9);
        let c = rect(2.0, 2.0, 2.0, 2.0, 0.0);
        assert!(intersect_area(&a, &c) < 1e-9);
    }

    #[test]
    fn contained_rectangle() {
        let big = rect(0.0, 0.0, 10.0, 10.0, 0.0);
        let small = rect(1.0, 1.0, 2.0, 1.0, 30.0);
        assert!((intersect_area(&big, &small) - 2.0).abs() < 1e-9);
        assert!((jaccard(&big, &small) - 0.02).abs() < 1e-9);
    }

    #[test]
    fn angle_diff_examples() {
        assert_eq!(angle_diff(10.0, -10.0), 20.0);
        assert!((angle_diff(89.0, -89.0) - 2.0).abs() < 1e-12);
        assert_eq!(angle_diff(45.0, 45.0), 0.0);
        assert_eq!(angle_diff(90.0, 0.0), 90.0);
        assert_eq!(angle_diff(0.0, 90.0), 90.0);
    }

    #[test]
    fn clipping_keeps_collinear_band_points_once() {
        let a = Polygon::from_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]);
        let out = a.clip_convex(&a);
        assert!((out.area() - 1.0).abs() < 1e-12);
        assert_eq!(out.vertices().len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_rect() -> impl Strategy<Value = RotatedRect> {
            (
                -50.0..50.0f64,
                -50.0..50.0f64,
                0.5..40.0f64,
                0.5..40.0f64,
                -180.0..180.0f64,
            )
                .prop_map(|(x, y, w, h, t)| RotatedRect::new(x, y, w, h, t).unwrap())
        }

        proptest! {
            #[test]
            fn jaccard_of_self_is_one(r in any_rect()) {
                prop_assert!((jaccard(&r, &r) - 1.0).abs() < 1e-9);
            }

            #[test]
            fn intersection_is_symmetric_and_bounded(a in any_rect(), b in any_rect()) {
                let ab = intersect_area(&a, &b);
                let ba = intersect_area(&b, &a);
                prop_assert!((ab - ba).abs() < 1e-9);
                prop_assert!(ab >= 0.0 && ab <= a.area().min(b.area()) + 1e-12);
            }

            #[test]
            fn jaccard_is_translation_invariant(
                a in any_rect(), b in any_rect(), dx in -500.0..500.0f64, dy in -500.0..500.0f64
            ) {
                let j0 = jaccard(&a, &b);
                let j1 = jaccard(&a.translated(dx, dy).unwrap(), &b.translated(dx, dy).unwrap());
                prop_assert!((j0 - j1).abs() < 1e-9);
            }

            #[test]
            fn angle_diff_is_symmetric_and_periodic(t1 in -720.0..720.0f64, t2 in -720.0..720.0f64) {
                let d = angle_diff(t1, t2);
                prop_assert!((0.0..=90.0).contains(&d));
                prop_assert!((d - angle_diff(t2, t1)).abs() < 1e-9);
                prop_assert!((d - angle_diff(t1 + 180.0, t2)).abs() < 1e-9);
            }

            #[test]
            fn normalized_angle_in_range(t in -1e4..1e4f64) {
                let n = normalize_angle(t);
                prop_assert!(n > -90.0 && n <= 90.0);
                prop_assert!(angle_diff(n, t) < 1e-9);
            }
        }
    }
}
