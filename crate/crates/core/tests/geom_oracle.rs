//! Polygon-clipping areas against an independent lattice count.
//!
//! The oracle samples a grid×grid lattice of cell centers over the joint
//! bounding box and counts points inside each rectangle, row by row, from
//! the rectangle's two slab constraints. It shares no code with `geom`.

use graspkit_core::geom::{intersect_area, jaccard};
use graspkit_core::RotatedRect;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy)]
struct Slabs {
    cx: f64,
    cy: f64,
    // (normal x, normal y, half width) for the two slabs.
    s: [(f64, f64, f64); 2],
}

impl Slabs {
    fn new(x: f64, y: f64, w: f64, h: f64, theta_deg: f64) -> Self {
        let (sin, cos) = theta_deg.to_radians().sin_cos();
        Self { cx: x, cy: y, s: [(cos, sin, w / 2.0), (-sin, cos, h / 2.0)] }
    }

    fn radius(&self) -> f64 {
        (self.s[0].2.powi(2) + self.s[1].2.powi(2)).sqrt()
    }

    /// x-interval inside the rectangle on the horizontal line at `y`.
    fn row(&self, y: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for &(nx, ny, half) in &self.s {
            let d = (y - self.cy) * ny;
            if nx.abs() < 1e-15 {
                if d.abs() > half {
                    return None;
                }
                continue;
            }
            let (a, b) = ((-half - d) / nx, (half - d) / nx);
            lo = lo.max(self.cx + a.min(b));
            hi = hi.min(self.cx + a.max(b));
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.s.iter().all(|&(nx, ny, half)| ((x - self.cx) * nx + (y - self.cy) * ny).abs() <= half)
    }
}

struct Lattice {
    x0: f64,
    y0: f64,
    step: f64,
    n: usize,
}

impl Lattice {
    fn covering(a: &Slabs, b: &Slabs, n: usize) -> Self {
        let (ra, rb) = (a.radius(), b.radius());
        let x0 = (a.cx - ra).min(b.cx - rb);
        let y0 = (a.cy - ra).min(b.cy - rb);
        let x1 = (a.cx + ra).max(b.cx + rb);
        let y1 = (a.cy + ra).max(b.cy + rb);
        Self { x0, y0, step: (x1 - x0).max(y1 - y0) / n as f64, n }
    }

    fn coord(&self, origin: f64, i: usize) -> f64 {
        origin + (i as f64 + 0.5) * self.step
    }

    /// Lattice columns with centers in `[lo, hi]`.
    fn columns(&self, (lo, hi): (f64, f64)) -> u64 {
        let first = ((lo - self.x0) / self.step - 0.5).ceil().max(0.0);
        let last = ((hi - self.x0) / self.step - 0.5).floor().min(self.n as f64 - 1.0);
        if last >= first {
            (last - first) as u64 + 1
        } else {
            0
        }
    }

    /// (points in a, points in b, points in both).
    fn counts(&self, a: &Slabs, b: &Slabs) -> (u64, u64, u64) {
        let (mut na, mut nb, mut both) = (0, 0, 0);
        for j in 0..self.n {
            let y = self.coord(self.y0, j);
            let (ia, ib) = (a.row(y), b.row(y));
            if let Some(i) = ia {
                na += self.columns(i);
            }
            if let Some(i) = ib {
                nb += self.columns(i);
            }
            if let (Some(p), Some(q)) = (ia, ib) {
                if p.0.max(q.0) <= p.1.min(q.1) {
                    both += self.columns((p.0.max(q.0), p.1.min(q.1)));
                }
            }
        }
        (na, nb, both)
    }

    fn brute_counts(&self, a: &Slabs, b: &Slabs) -> (u64, u64, u64) {
        let (mut na, mut nb, mut both) = (0, 0, 0);
        for j in 0..self.n {
            for i in 0..self.n {
                let (x, y) = (self.coord(self.x0, i), self.coord(self.y0, j));
                let (ina, inb) = (a.contains(x, y), b.contains(x, y));
                na += ina as u64;
                nb += inb as u64;
                both += (ina && inb) as u64;
            }
        }
        (na, nb, both)
    }

    fn cell_area(&self) -> f64 {
        self.step * self.step
    }
}

fn oracle(a: (f64, f64, f64, f64, f64), b: (f64, f64, f64, f64, f64), n: usize) -> (f64, f64) {
    let sa = Slabs::new(a.0, a.1, a.2, a.3, a.4);
    let sb = Slabs::new(b.0, b.1, b.2, b.3, b.4);
    let lattice = Lattice::covering(&sa, &sb, n);
    let (na, nb, both) = lattice.counts(&sa, &sb);
    let union = na + nb - both;
    let iou = if union == 0 { 0.0 } else { both as f64 / union as f64 };
    (both as f64 * lattice.cell_area(), iou)
}

fn rect(t: (f64, f64, f64, f64, f64)) -> RotatedRect {
    RotatedRect::new(t.0, t.1, t.2, t.3, t.4).unwrap()
}

#[test]
fn unit_square_and_its_45_degree_rotation() {
    let a = (0.0, 0.0, 1.0, 1.0, 0.0);
    let b = (0.0, 0.0, 1.0, 1.0, 45.0);
    // The overlap is a regular octagon with inradius 1/2.
    let octagon = 2.0 * (2f64.sqrt() - 1.0);
    let (area, iou) = oracle(a, b, 2000);
    assert!((area - octagon).abs() < 1e-3, "{area}");
    assert!((iou - octagon / (2.0 - octagon)).abs() < 1e-3, "{iou}");
    assert!((intersect_area(&rect(a), &rect(b)) - octagon).abs() < 1e-12);
    assert!((jaccard(&rect(a), &rect(b)) - octagon / (2.0 - octagon)).abs() < 1e-12);
}

#[test]
fn row_counts_agree_with_point_tests() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a = Slabs::new(
            rng.random_range(0.0..50.0),
            rng.random_range(0.0..50.0),
            rng.random_range(5.0..40.0),
            rng.random_range(5.0..40.0),
            rng.random_range(-90.0..90.0),
        );
        let b = Slabs::new(
            a.cx + rng.random_range(-15.0..15.0),
            a.cy + rng.random_range(-15.0..15.0),
            rng.random_range(5.0..40.0),
            rng.random_range(5.0..40.0),
            rng.random_range(-90.0..90.0),
        );
        let lattice = Lattice::covering(&a, &b, 300);
        let fast = lattice.counts(&a, &b);
        let slow = lattice.brute_counts(&a, &b);
        // Points exactly on an edge may land either way.
        assert!(fast.0.abs_diff(slow.0) <= 2 && fast.1.abs_diff(slow.1) <= 2 && fast.2.abs_diff(slow.2) <= 2);
    }
}

#[test]
fn clipping_matches_lattice_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let a = (
            rng.random_range(0.0..100.0),
            rng.random_range(0.0..100.0),
            rng.random_range(5.0..80.0),
            rng.random_range(5.0..80.0),
            rng.random_range(-89.0..90.0),
        );
        let b = (
            a.0 + rng.random_range(-30.0..30.0),
            a.1 + rng.random_range(-30.0..30.0),
            rng.random_range(5.0..80.0),
            rng.random_range(5.0..80.0),
            rng.random_range(-89.0..90.0),
        );
        let (_, iou) = oracle(a, b, 2000);
        let got = jaccard(&rect(a), &rect(b));
        assert!((got - iou).abs() < 1e-3, "{a:?} {b:?}: {got} vs {iou}");
    }
}
