use alloc::vec::Vec;

use super::{Bitmap, DigitSemantic, SIDE};
use crate::geom::Vec2;

/// Line pieces per cubic segment when flattening.
const FLATTEN_STEPS: usize = 10;
/// Sub-scanlines per pixel row; horizontal coverage is exact.
const SUBSAMPLES: usize = 6;

pub(crate) fn cubic_point(seg: &[Vec2; 4], t: f64) -> Vec2 {
    let u = 1.0 - t;
    seg[0] * (u * u * u) + seg[1] * (3.0 * u * u * t) + seg[2] * (3.0 * u * t * t) + seg[3] * (t * t * t)
}

fn edges(sem: &DigitSemantic) -> Vec<(Vec2, Vec2)> {
    let mut out = Vec::new();
    for path in sem.paths() {
        for k in 0..path.segment_count() {
            let seg = path.segment(k);
            let mut prev = seg[0];
            for s in 1..=FLATTEN_STEPS {
                let p = cubic_point(&seg, s as f64 / FLATTEN_STEPS as f64);
                out.push((prev, p));
                prev = p;
            }
        }
    }
    out
}

/// Anti-aliased even-odd fill of the outlines on the `SIDE x SIDE` canvas.
/// Empty or zero-area outlines give a blank bitmap.
pub fn rasterize(sem: &DigitSemantic) -> Bitmap {
    let mut bmp = Bitmap::blank(SIDE, SIDE);
    let edges = edges(sem);
    if edges.is_empty() {
        return bmp;
    }
    let weight = 1.0 / SUBSAMPLES as f64;
    let mut crossings: Vec<f64> = Vec::new();
    let mut row_acc = [0.0f64; SIDE];
    for row in 0..SIDE {
        row_acc.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..SUBSAMPLES {
            let y = row as f64 - 0.5 + (s as f64 + 0.5) * weight;
            crossings.clear();
            for &(a, b) in &edges {
                if (a.y <= y && y < b.y) || (b.y <= y && y < a.y) {
                    let t = (y - a.y) / (b.y - a.y);
                    crossings.push(a.x + t * (b.x - a.x));
                }
            }
            crossings.sort_by(|a, b| a.total_cmp(b));
            for span in crossings.chunks_exact(2) {
                add_span(&mut row_acc, span[0], span[1], weight);
            }
        }
        for (c, &v) in row_acc.iter().enumerate() {
            bmp.pixels[row * SIDE + c] = v.min(1.0) as f32;
        }
    }
    bmp
}

/// Adds the overlap of `[x0, x1]` with each pixel column `[c - 0.5, c + 0.5)`.
fn add_span(row: &mut [f64; SIDE], x0: f64, x1: f64, weight: f64) {
    let lo = libm::floor(x0 + 0.5).max(0.0) as usize;
    let hi = (libm::floor(x1 + 0.5).min(SIDE as f64 - 1.0)).max(-1.0);
    if hi < 0.0 {
        return;
    }
    for c in lo..=(hi as usize) {
        let left = c as f64 - 0.5;
        let overlap = x1.min(left + 1.0) - x0.max(left);
        if overlap > 0.0 {
            row[c] += overlap * weight;
        }
    }
}
