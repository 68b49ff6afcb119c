use alloc::vec::Vec;

use crate::geom::{GeomError, Point, RotatedRect};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: expected two numbers \"x y\"")]
    Malformed { line: usize },
    #[error("line {line}: rectangle has only {vertices} of 4 vertices")]
    IncompleteGroup { line: usize, vertices: usize },
}

/// A rectangle dropped while parsing; `line` is its first vertex.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseWarning {
    NanVertex { line: usize },
    Degenerate { line: usize, error: GeomError },
}

/// Rectangle from four corners. The first edge gives the width and the
/// angle; the second edge gives the height.
pub fn rect_from_quad(p: &[Point; 4]) -> Result<RotatedRect, GeomError> {
    let cx = p.iter().map(|q| q.x).sum::<f64>() / 4.0;
    let cy = p.iter().map(|q| q.y).sum::<f64>() / 4.0;
    let (dx, dy) = (p[1].x - p[0].x, p[1].y - p[0].y);
    let theta = math::atan2(dy, dx).to_degrees();
    RotatedRect::new(cx, cy, p[0].dist(p[1]), p[1].dist(p[2]), theta)
}

/// Parses a Cornell `cpos` file: one `x y` vertex per line, four lines per
/// rectangle. Blank lines are ignored. Groups containing NaN or describing a
/// degenerate rectangle are dropped with a warning.
pub fn parse_grasp_file(text: &str) -> Result<(Vec<RotatedRect>, Vec<ParseWarning>), ParseError> {
    let mut vertices: Vec<(usize, Point)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        let x = first.parse::<f64>();
        let y = tokens.next().map(str::parse::<f64>);
        match (x, y, tokens.next()) {
            (Ok(x), Some(Ok(y)), None) => vertices.push((line_no, Point::new(x, y))),
            _ => return Err(ParseError::Malformed { line: line_no }),
        }
    }
    let rem = vertices.len() % 4;
    if rem != 0 {
        let (line, _) = vertices[vertices.len() - rem];
        return Err(ParseError::IncompleteGroup {
            line,
            vertices: rem,
        });
    }
    let mut rects = Vec::with_capacity(vertices.len() / 4);
    let mut warnings = Vec::new();
    for group in vertices.chunks_exact(4) {
        let line = group[0].0;
        if group.iter().any(|(_, p)| p.x.is_nan() || p.y.is_nan()) {
            warnings.push(ParseWarning::NanVertex { line });
            continue;
        }
        let quad = [group[0].1, group[1].1, group[2].1, group[3].1];
        match rect_from_quad(&quad) {
            Ok(r) => rects.push(r),
            Err(error) => warnings.push(ParseWarning::Degenerate { line, error }),
        }
    }
    Ok((rects, warnings))
}
