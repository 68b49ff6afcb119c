//! Plain-text formats: rectangle lists, offset lists, prediction files,
//! calibration files and depth rasters.
//!
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use graspkit_core::anchor::OffsetVector;
use graspkit_core::data::{DepthMap, Raster, RgbImage};
use graspkit_core::{GraspCandidate, RotatedRect};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Content(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

fn line_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        message: message.into(),
    }
}

/// Non-comment lines with their 1-based numbers.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn numbers(line: usize, fields: &[&str]) -> Result<Vec<f64>, FormatError> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| line_err(line, format!("not a number: {f:?}")))
        })
        .collect()
}

pub fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn make_rect(line: usize, v: &[f64]) -> Result<RotatedRect, FormatError> {
    RotatedRect::new(v[0], v[1], v[2], v[3], v[4]).map_err(|e| line_err(line, e.to_string()))
}

/// `x y w h theta [score]` per line.
pub fn parse_rects(text: &str) -> Result<Vec<(RotatedRect, Option<f64>)>, FormatError> {
    content_lines(text)
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split_ascii_whitespace().collect();
            if fields.len() != 5 && fields.len() != 6 {
                return Err(line_err(
                    n,
                    format!("expected 5 or 6 fields, found {}", fields.len()),
                ));
            }
            let v = numbers(n, &fields)?;
            Ok((make_rect(n, &v)?, v.get(5).copied()))
        })
        .collect()
}

pub fn rect_line(r: &RotatedRect, score: Option<f64>) -> String {
    let mut s = [r.x(), r.y(), r.w(), r.h(), r.theta()].map(fmt6).join(" ");
    if let Some(v) = score {
        let _ = write!(s, " {}", fmt6(v));
    }
    s
}

/// `anchor tx ty tw th ttheta` per line.
pub fn parse_offsets(text: &str) -> Result<Vec<(usize, OffsetVector)>, FormatError> {
    content_lines(text)
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split_ascii_whitespace().collect();
            if fields.len() != 6 {
                return Err(line_err(
                    n,
                    format!("expected 6 fields, found {}", fields.len()),
                ));
            }
            let anchor = fields[0]
                .parse()
                .map_err(|_| line_err(n, format!("bad anchor index {:?}", fields[0])))?;
            Ok((anchor, OffsetVector::from_slice(&numbers(n, &fields[1..])?)))
        })
        .collect()
}

pub fn offset_line(anchor: usize, t: &OffsetVector) -> String {
    let v = t.to_array().map(fmt6).join(" ");
    format!("{anchor} {v}")
}

/// One line per image: `id` followed by `x y w h theta score` per candidate.
pub fn parse_predictions(text: &str) -> Result<Vec<(String, Vec<GraspCandidate>)>, FormatError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, l) in content_lines(text) {
        let mut fields = l.split_ascii_whitespace();
        let id = fields.next().unwrap_or_default().to_string();
        let rest: Vec<&str> = fields.collect();
        if !rest.len().is_multiple_of(6) {
            return Err(line_err(
                n,
                format!(
                    "{} numbers after the id, expected a multiple of 6",
                    rest.len()
                ),
            ));
        }
        if !seen.insert(id.clone()) {
            return Err(line_err(n, format!("duplicate image id {id:?}")));
        }
        let cands = numbers(n, &rest)?
            .chunks_exact(6)
            .map(|c| {
                if !(0.0..=1.0).contains(&c[5]) {
                    return Err(line_err(n, format!("score {} outside [0, 1]", c[5])));
                }
                Ok(GraspCandidate {
                    rect: make_rect(n, c)?,
                    score: c[5],
                    anchor: None,
                })
            })
            .collect::<Result<_, _>>()?;
        out.push((id, cands));
    }
    Ok(out)
}

pub fn prediction_line(id: &str, cands: &[GraspCandidate]) -> String {
    let mut s = id.to_string();
    for c in cands {
        let _ = write!(s, " {}", rect_line(&c.rect, Some(c.score)));
    }
    s
}

pub type CalibrationPairs = [([f64; 3], [f64; 3]); 4];

/// Four `cx cy cz rx ry rz` lines, meters.
pub fn parse_calibration(text: &str) -> Result<CalibrationPairs, FormatError> {
    let rows: Vec<(usize, Vec<f64>)> = content_lines(text)
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split_ascii_whitespace().collect();
            if fields.len() != 6 {
                return Err(line_err(
                    n,
                    format!("expected 6 fields, found {}", fields.len()),
                ));
            }
            Ok((n, numbers(n, &fields)?))
        })
        .collect::<Result<_, _>>()?;
    if rows.len() != 4 {
        return Err(FormatError::Content(format!(
            "calibration needs 4 point pairs, found {}",
            rows.len()
        )));
    }
    Ok(std::array::from_fn(|i| {
        let v = &rows[i].1;
        ([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    }))
}

/// Whitespace-separated depth matrix in meters; `nan` or non-positive
/// entries are invalid.
pub fn parse_depth_text(text: &str) -> Result<DepthMap, FormatError> {
    let mut width = None;
    let mut values = Vec::new();
    let mut height = 0;
    for (n, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_ascii_whitespace().collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(line_err(
                    n,
                    format!("row has {} values, expected {w}", fields.len()),
                ));
            }
            _ => {}
        }
        values.extend(numbers(n, &fields)?);
        height += 1;
    }
    let width = width.ok_or_else(|| FormatError::Content("empty depth matrix".into()))?;
    Ok(DepthMap::from_values(width, height, values))
}

/// Depth from a 16-bit grayscale PNG scaled by `scale` (meters per unit);
/// zero is invalid.
pub fn load_depth_png(path: &Path, scale: f64) -> Result<DepthMap, FormatError> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let values = img
        .pixels()
        .map(|p| {
            if p.0[0] == 0 {
                f64::NAN
            } else {
                p.0[0] as f64 * scale
            }
        })
        .collect();
    Ok(DepthMap::from_values(w as usize, h as usize, values))
}

/// PNG (16-bit, `png_scale` meters per unit) or text matrix by extension.
pub fn load_depth(path: &Path, png_scale: f64) -> Result<DepthMap, FormatError> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        load_depth_png(path, png_scale)
    } else {
        parse_depth_text(&std::fs::read_to_string(path)?)
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage, FormatError> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    Ok(Raster {
        width: w as usize,
        height: h as usize,
        data: img.pixels().map(|p| p.0).collect(),
    })
}

pub fn rgb_to_image(r: &RgbImage) -> image::RgbImage {
    image::RgbImage::from_fn(r.width as u32, r.height as u32, |x, y| {
        image::Rgb(r.get(x as usize, y as usize))
    })
}
