use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DepthMap, Raster, SampleRecord};
use crate::geom::{Point, RotatedRect};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error(
        "source {width}×{height} is too small for a {crop} crop with ±{translation} px translation"
    )]
    SourceTooSmall {
        width: usize,
        height: usize,
        crop: usize,
        translation: f64,
    },
    #[error("every grasp left the crop in {attempts} attempts")]
    AllGraspsDropped { attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub crop: usize,
    pub max_translation: f64,
    /// Degrees, either direction.
    pub max_rotation: f64,
    pub hflip: bool,
    pub vflip: bool,
    pub max_attempts: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            crop: 320,
            max_translation: 50.0,
            max_rotation: 30.0,
            hflip: true,
            vflip: true,
            max_attempts: 10,
        }
    }
}

/// Crop about the source center shifted by `(dx, dy)`, rotate the patch by
/// `rotation` degrees about its center, then mirror.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Transform {
    pub dx: f64,
    pub dy: f64,
    pub rotation: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl Transform {
    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        let t = cfg.max_translation;
        let r = cfg.max_rotation;
        Self {
            dx: if t > 0.0 {
                rng.random_range(-t..=t)
            } else {
                0.0
            },
            dy: if t > 0.0 {
                rng.random_range(-t..=t)
            } else {
                0.0
            },
            rotation: if r > 0.0 {
                rng.random_range(-r..=r)
            } else {
                0.0
            },
            hflip: cfg.hflip && rng.random_bool(0.5),
            vflip: cfg.vflip && rng.random_bool(0.5),
        }
    }

    fn crop_center(&self, width: usize, height: usize) -> Point {
        Point::new(0.5 * width as f64 + self.dx, 0.5 * height as f64 + self.dy)
    }

    /// Source point → output point.
    pub fn apply(&self, p: Point, source: (usize, usize), crop: usize) -> Point {
        let c = self.crop_center(source.0, source.1);
        let (s, co) = math::sin_cos_deg(self.rotation);
        let (qx, qy) = (p.x - c.x, p.y - c.y);
        let (mut x, mut y) = (qx * co - qy * s, qx * s + qy * co);
        if self.hflip {
            x = -x;
        }
        if self.vflip {
            y = -y;
        }
        let half = 0.5 * crop as f64;
        Point::new(x + half, y + half)
    }

    /// Output point → source point.
    pub fn invert(&self, p: Point, source: (usize, usize), crop: usize) -> Point {
        let half = 0.5 * crop as f64;
        let (mut x, mut y) = (p.x - half, p.y - half);
        if self.hflip {
            x = -x;
        }
        if self.vflip {
            y = -y;
        }
        let (s, co) = math::sin_cos_deg(self.rotation);
        let c = self.crop_center(source.0, source.1);
        Point::new(c.x + x * co + y * s, c.y - x * s + y * co)
    }

    pub fn apply_angle(&self, theta: f64) -> f64 {
        let mut t = theta + self.rotation;
        if self.hflip {
            t = -t;
        }
        if self.vflip {
            t = -t;
        }
        t
    }

    pub fn apply_rect(&self, r: &RotatedRect, source: (usize, usize), crop: usize) -> RotatedRect {
        let c = self.apply(r.center(), source, crop);
        RotatedRect::new(c.x, c.y, r.w(), r.h(), self.apply_angle(r.theta()))
            .expect("rigid motions keep rectangles valid")
    }
}

/// Applies one transform to image, depth and grasps. Pixels are sampled at
/// their nearest source pixel; samples falling outside the source become
/// black with invalid depth. Grasps whose centers leave the crop are dropped.
pub fn apply_transform(sample: &SampleRecord, t: &Transform, crop: usize) -> SampleRecord {
    let source = (sample.rgb.width, sample.rgb.height);
    let mut rgb = Raster::filled(crop, crop, [0u8; 3]);
    let mut depth = Raster::filled(crop, crop, 0.0);
    let mut valid = Raster::filled(crop, crop, false);
    for y in 0..crop {
        for x in 0..crop {
            let s = t.invert(Point::new(x as f64 + 0.5, y as f64 + 0.5), source, crop);
            let (sx, sy) = (math::floor(s.x), math::floor(s.y));
            if sx < 0.0 || sy < 0.0 || sx >= source.0 as f64 || sy >= source.1 as f64 {
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            rgb.set(x, y, sample.rgb.get(sx, sy));
            if let Some(d) = sample.depth.at(sx, sy) {
                depth.set(x, y, d);
                valid.set(x, y, true);
            }
        }
    }
    let size = crop as f64;
    let grasps = sample
        .grasps
        .iter()
        .map(|g| t.apply_rect(g, source, crop))
        .filter(|g| g.x() >= 0.0 && g.y() >= 0.0 && g.x() < size && g.y() < size)
        .collect::<Vec<_>>();
    SampleRecord {
        id: sample.id.clone(),
        instance: sample.instance.clone(),
        rgb,
        depth: DepthMap { depth, valid },
        grasps,
    }
}

/// Random crop, rotation and flips; redraws the transform when every grasp
/// would be lost.
pub fn augment<R: Rng + ?Sized>(
    sample: &SampleRecord,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(SampleRecord, Transform), AugmentError> {
    let (w, h) = (sample.rgb.width, sample.rgb.height);
    let need = cfg.crop as f64 + 2.0 * cfg.max_translation;
    if (w as f64) < need || (h as f64) < need {
        return Err(AugmentError::SourceTooSmall {
            width: w,
            height: h,
            crop: cfg.crop,
            translation: cfg.max_translation,
        });
    }
    for _ in 0..cfg.max_attempts.max(1) {
        let t = Transform::sample(cfg, rng);
        let out = apply_transform(sample, &t, cfg.crop);
        if !out.grasps.is_empty() || sample.grasps.is_empty() {
            return Ok((out, t));
        }
    }
    Err(AugmentError::AllGraspsDropped {
        attempts: cfg.max_attempts.max(1),
    })
}

/// Independent generator for one sample of one epoch, so results do not
/// depend on which worker handles which sample.
pub fn sample_rng(root_seed: u64, epoch: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
