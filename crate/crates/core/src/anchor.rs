//! Oriented anchor grid and the rectangle ↔ offset codec.

use alloc::vec::Vec;

use crate::geom::{normalize_angle, GeomError, RotatedRect};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("stride must be positive")]
    ZeroStride,
    #[error("input size {input_size} is not divisible by stride {stride}")]
    NotDivisible { input_size: u32, stride: u32 },
    #[error("at least one anchor per cell is required")]
    ZeroAnchors,
}

/// One oriented prior. Anchors are always square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorBox {
    pub x: f64,
    pub y: f64,
    pub side: f64,
    pub theta: f64,
}

impl AnchorBox {
    pub fn w(&self) -> f64 {
        self.side
    }

    pub fn h(&self) -> f64 {
        self.side
    }

    pub fn rect(&self) -> RotatedRect {
        RotatedRect::new(self.x, self.y, self.side, self.side, self.theta)
            .expect("anchor boxes are valid by construction")
    }
}

/// Regression offsets `(t_x, t_y, t_w, t_h, t_θ)` relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OffsetVector {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
    pub ttheta: f64,
}

impl OffsetVector {
    pub const fn new(tx: f64, ty: f64, tw: f64, th: f64, ttheta: f64) -> Self {
        Self {
            tx,
            ty,
            tw,
            th,
            ttheta,
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.tx, self.ty, self.tw, self.th, self.ttheta]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Degrees covered by one unit of `t_θ`.
pub fn angle_scale(k: usize) -> f64 {
    90.0 / k as f64
}

/// Default angle of the `m`-th anchor in a cell: `−90 + (180/k)(m + 0.5)`.
pub fn anchor_angle(m: usize, k: usize) -> f64 {
    -90.0 + (180.0 / k as f64) * (m as f64 + 0.5)
}

/// Anchor side for a stride: 48 px at stride 32, 24 px at stride 16.
pub fn anchor_side(stride: u32) -> f64 {
    1.5 * stride as f64
}

/// `n × n` cells, `k` anchors per cell, indexed `(row · n + col) · k + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGrid {
    input_size: u32,
    stride: u32,
    n: usize,
    k: usize,
    boxes: Vec<AnchorBox>,
}

impl AnchorGrid {
    pub fn new(input_size: u32, stride: u32, k: usize) -> Result<Self, GridError> {
        if stride == 0 {
            return Err(GridError::ZeroStride);
        }
        if input_size == 0 || !input_size.is_multiple_of(stride) {
            return Err(GridError::NotDivisible { input_size, stride });
        }
        if k == 0 {
            return Err(GridError::ZeroAnchors);
        }
        let n = (input_size / stride) as usize;
        let side = anchor_side(stride);
        let s = stride as f64;
        let mut boxes = Vec::with_capacity(n * n * k);
        for row in 0..n {
            for col in 0..n {
                for m in 0..k {
                    boxes.push(AnchorBox {
                        x: (col as f64 + 0.5) * s,
                        y: (row as f64 + 0.5) * s,
                        side,
                        theta: anchor_angle(m, k),
                    });
                }
            }
        }
        Ok(Self {
            input_size,
            stride,
            n,
            k,
            boxes,
        })
    }

    pub fn input_size(&self) -> u32 {
        self.input_size
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Anchors per cell.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> &[AnchorBox] {
        &self.boxes
    }

    pub fn get(&self, index: usize) -> &AnchorBox {
        &self.boxes[index]
    }

    pub fn index(&self, row: usize, col: usize, m: usize) -> usize {
        (row * self.n + col) * self.k + m
    }

    /// `(row, col, m)` of an anchor index.
    pub fn position(&self, index: usize) -> (usize, usize, usize) {
        let m = index % self.k;
        let cell = index / self.k;
        (cell / self.n, cell % self.n, m)
    }

    /// Cell containing an image point, or `None` outside `[0, input_size)²`.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let size = self.input_size as f64;
        if !(x >= 0.0 && y >= 0.0 && x < size && y < size) {
            return None;
        }
        let s = self.stride as f64;
        let col = ((math::floor(x / s)) as usize).min(self.n - 1);
        let row = ((math::floor(y / s)) as usize).min(self.n - 1);
        Some((row, col))
    }

    /// Output channels per cell of the classification and regression maps.
    pub fn channels(&self) -> (usize, usize) {
        (2 * self.k, 5 * self.k)
    }
}

/// Offsets → rectangle.
///
/// Fails only when the offsets are non-finite or push the size out of the
/// representable range.
pub fn decode(a: &AnchorBox, t: &OffsetVector, k: usize) -> Result<RotatedRect, GeomError> {
    if !t.is_finite() {
        return Err(GeomError::NonFinite);
    }
    RotatedRect::new(
        a.x + t.tx * a.w(),
        a.y + t.ty * a.h(),
        a.w() * math::exp(t.tw),
        a.h() * math::exp(t.th),
        a.theta + t.ttheta * angle_scale(k),
    )
}

/// Rectangle → offsets; the inverse of [`decode`].
pub fn encode(a: &AnchorBox, g: &RotatedRect, k: usize) -> OffsetVector {
    OffsetVector {
        tx: (g.x() - a.x) / a.w(),
        ty: (g.y() - a.y) / a.h(),
        tw: math::ln(g.w() / a.w()),
        th: math::ln(g.h() / a.h()),
        ttheta: normalize_angle(g.theta() - a.theta) / angle_scale(k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::angle_diff;
    use std::vec::Vec;

    #[test]
    fn grid_320_stride_32_k6() {
        let g = AnchorGrid::new(320, 32, 6).unwrap();
        assert_eq!(g.n(), 10);
        assert_eq!(g.len(), 600);
        assert!(g.boxes().iter().all(|b| b.side == 48.0));
        assert_eq!(g.channels(), (12, 30));
    }

    #[test]
    fn grid_320_stride_16_k4() {
        let g = AnchorGrid::new(320, 16, 4).unwrap();
        assert_eq!(g.n(), 20);
        assert!(g.boxes().iter().all(|b| b.side == 24.0));
        let angles: Vec<f64> = (0..4).map(|m| g.get(m).theta).collect();
        assert_eq!(angles, [-67.5, -22.5, 22.5, 67.5]);
    }

    #[test]
    fn three_anchor_angles() {
        let g = AnchorGrid::new(320, 32, 3).unwrap();
        let angles: Vec<f64> = (0..3).map(|m| g.get(g.index(4, 7, m)).theta).collect();
        assert_eq!(angles, [-60.0, 0.0, 60.0]);
    }

    #[test]
    fn cell_centers_and_indexing() {
        let g = AnchorGrid::new(320, 32, 4).unwrap();
        let idx = g.index(2, 5, 3);
        let b = g.get(idx);
        assert_eq!((b.x, b.y), (176.0, 80.0));
        assert_eq!(g.position(idx), (2, 5, 3));
        assert_eq!(g.cell_of(176.0, 80.0), Some((2, 5)));
        assert_eq!(g.cell_of(320.0, 10.0), None);
        assert_eq!(g.cell_of(-0.1, 10.0), None);
    }

    #[test]
    fn bad_configurations() {
        assert_eq!(
            AnchorGrid::new(320, 30, 4),
            Err(GridError::NotDivisible {
                input_size: 320,
                stride: 30
            })
        );
        assert_eq!(AnchorGrid::new(320, 0, 4), Err(GridError::ZeroStride));
        assert_eq!(AnchorGrid::new(320, 32, 0), Err(GridError::ZeroAnchors));
    }

    #[test]
    fn adjacent_anchors_differ_by_bin_width() {
        for k in 1..=12 {
            let g = AnchorGrid::new(64, 32, k).unwrap();
            for m in 1..k {
                assert!((g.get(m).theta - g.get(m - 1).theta - 180.0 / k as f64).abs() < 1e-12);
            }
            assert!(g.boxes().iter().all(|b| b.theta > -90.0 && b.theta <= 90.0));
        }
    }

    #[test]
    fn every_angle_within_half_bin_of_an_anchor() {
        for k in [1usize, 3, 4, 6, 8] {
            for i in 0..3600 {
                let t = normalize_angle(-90.0 + 0.05 * i as f64 + 0.013);
                let best = (0..k)
                    .map(|m| angle_diff(t, anchor_angle(m, k)))
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= 90.0 / k as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn zero_offsets_reproduce_anchor() {
        let a = AnchorBox {
            x: 48.0,
            y: 16.0,
            side: 48.0,
            theta: -22.5,
        };
        let r = decode(&a, &OffsetVector::default(), 4).unwrap();
        assert_eq!(r, a.rect());
    }

    #[test]
    fn log_width_offset_doubles_width() {
        let a = AnchorBox {
            x: 48.0,
            y: 16.0,
            side: 48.0,
            theta: 22.5,
        };
        let r = decode(&a, &OffsetVector::new(0.0, 0.0, 2f64.ln(), 0.0, 0.0), 4).unwrap();
        assert!((r.w() - 96.0).abs() < 1e-12);
        assert_eq!((r.x(), r.y(), r.h(), r.theta()), (48.0, 16.0, 48.0, 22.5));
    }

    #[test]
    fn unit_angle_offset_moves_half_bin() {
        let a = AnchorBox {
            x: 0.0,
            y: 0.0,
            side: 24.0,
            theta: 22.5,
        };
        let r = decode(&a, &OffsetVector::new(0.0, 0.0, 0.0, 0.0, 1.0), 4).unwrap();
        assert_eq!(r.theta(), 45.0);
    }

    #[test]
    fn encode_anchor_itself_is_zero() {
        let a = AnchorBox {
            x: 80.0,
            y: 112.0,
            side: 48.0,
            theta: 67.5,
        };
        assert_eq!(encode(&a, &a.rect(), 4), OffsetVector::default());
    }

    #[test]
    fn encode_half_width_shift() {
        let a = AnchorBox {
            x: 80.0,
            y: 112.0,
            side: 48.0,
            theta: 67.5,
        };
        let g = RotatedRect::new(104.0, 112.0, 48.0, 48.0, 67.5).unwrap();
        assert_eq!(
            encode(&a, &g, 4),
            OffsetVector::new(0.5, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn decode_rejects_non_finite() {
        let a = AnchorBox {
            x: 0.0,
            y: 0.0,
            side: 24.0,
            theta: 0.0,
        };
        let t = OffsetVector::new(f64::NAN, 0.0, 0.0, 0.0, 0.0);
        assert!(decode(&a, &t, 4).is_err());
        let t = OffsetVector::new(0.0, 0.0, 1e4, 0.0, 0.0);
        assert!(decode(&a, &t, 4).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roundtrip(
                ax in 0.0..320.0f64, ay in 0.0..320.0f64, side in prop::sample::select(std::vec![24.0, 48.0]),
                k in 1usize..10, m in 0usize..10,
                x in -50.0..370.0f64, y in -50.0..370.0f64, w in 1.0..150.0f64, h in 1.0..150.0f64,
                t in -90.0..90.0f64,
            ) {
                let a = AnchorBox { x: ax, y: ay, side, theta: anchor_angle(m % k, k) };
                let g = RotatedRect::new(x, y, w, h, t).unwrap();
                let back = decode(&a, &encode(&a, &g, k), k).unwrap();
                prop_assert!((back.x() - g.x()).abs() < 1e-9);
                prop_assert!((back.y() - g.y()).abs() < 1e-9);
                prop_assert!((back.w() - g.w()).abs() < 1e-9);
                prop_assert!((back.h() - g.h()).abs() < 1e-9);
                prop_assert!(angle_diff(back.theta(), g.theta()) < 1e-9);
            }
        }
    }
}
