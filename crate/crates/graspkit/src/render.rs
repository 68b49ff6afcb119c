//! Draws grasp rectangles onto RGB images.

use graspkit_core::RotatedRect;
use image::{Rgb, RgbImage};

/// Outline colors by score rank; rank 0 is the best-scoring rectangle.
pub const PALETTE: [[u8; 3]; 8] = [
    [255, 0, 0],
    [0, 200, 0],
    [0, 90, 255],
    [255, 200, 0],
    [255, 0, 255],
    [0, 220, 220],
    [255, 128, 0],
    [128, 0, 255],
];

pub fn rank_color(rank: usize) -> Rgb<u8> {
    Rgb(PALETTE[rank % PALETTE.len()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub labels: bool,
    /// Draw only the best `top` rectangles when set.
    pub top: Option<usize>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            labels: true,
            top: None,
        }
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Bresenham segment including both endpoints.
pub fn draw_line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        put(img, x, y, c);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

pub fn draw_rect(img: &mut RgbImage, r: &RotatedRect, c: Rgb<u8>) {
    let v = r
        .vertices()
        .map(|p| (p.x.round() as i64, p.y.round() as i64));
    for i in 0..4 {
        draw_line(img, v[i], v[(i + 1) % 4], c);
    }
}

/// 3×5 glyphs, one row per byte, high bit on the left.
fn glyph(ch: char) -> Option<[u8; 5]> {
    Some(match ch {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        _ => return None,
    })
}

/// Draws `text` with its top-left corner at `(x, y)`; unknown characters
/// leave a gap.
pub fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, c: Rgb<u8>) {
    for (i, ch) in text.chars().enumerate() {
        let Some(rows) = glyph(ch) else { continue };
        let ox = x + 4 * i as i64;
        for (dy, bits) in rows.iter().enumerate() {
            for dx in 0..3 {
                if bits & (0b100 >> dx) != 0 {
                    put(img, ox + dx, y + dy as i64, c);
                }
            }
        }
    }
}

/// Rank order: higher score first, unscored after scored, file order on ties.
pub fn rank_order(rects: &[(RotatedRect, Option<f64>)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rects.len()).collect();
    let key = |i: usize| rects[i].1.unwrap_or(f64::NEG_INFINITY);
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order
}

/// Draws rectangles on a copy of `img`, worst rank first so the best ends
/// on top.
pub fn render(
    img: &RgbImage,
    rects: &[(RotatedRect, Option<f64>)],
    opts: &RenderOptions,
) -> RgbImage {
    let mut out = img.clone();
    let mut order = rank_order(rects);
    if let Some(top) = opts.top {
        order.truncate(top);
    }
    for (rank, &i) in order.iter().enumerate().rev() {
        let (r, score) = &rects[i];
        let c = rank_color(rank);
        draw_rect(&mut out, r, c);
        if let (true, Some(s)) = (opts.labels, score) {
            let v = r.vertices();
            let x = v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).round() as i64;
            let y = v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).round() as i64;
            draw_text(&mut out, x, (y - 7).max(0), &format!("{s:.2}"), c);
        }
    }
    out
}
