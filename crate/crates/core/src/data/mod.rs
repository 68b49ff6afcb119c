//! Cornell-style samples: annotation parsing, RGD fusion, online
//! augmentation and cross-validation splits.

mod augment;
mod grasp_file;
mod rgd;
mod split;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geom::RotatedRect;

pub use augment::{apply_transform, augment, sample_rng, AugmentConfig, AugmentError, Transform};
pub use grasp_file::{parse_grasp_file, rect_from_quad, ParseError, ParseWarning};
pub use rgd::{fill_invalid, fuse_rgd, FuseError};
pub use split::{make_splits, SplitError, SplitMode, SplitPlan, FOLDS};

/// Dense row-major raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

pub type RgbImage = Raster<[u8; 3]>;

/// Depth in meters with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub depth: Raster<f64>,
    pub valid: Raster<bool>,
}

impl DepthMap {
    /// Every pixel valid.
    pub fn dense(depth: Raster<f64>) -> Self {
        let valid = Raster::filled(depth.width, depth.height, true);
        Self { depth, valid }
    }

    /// Pixels that are non-finite or not positive are marked invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        let valid = values.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Self {
            depth: Raster {
                width,
                height,
                data: values,
            },
            valid: Raster {
                width,
                height,
                data: valid,
            },
        }
    }

    pub fn width(&self) -> usize {
        self.depth.width
    }

    pub fn height(&self) -> usize {
        self.depth.height
    }

    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        self.valid.get(x, y).then(|| self.depth.get(x, y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub id: String,
    pub instance: String,
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub grasps: Vec<RotatedRect>,
}
