//! Bitmap tracing: iso-contours by marching squares, breakpoints by
//! Douglas-Peucker, then least-squares cubic fitting with recursive splits.

use alloc::vec;
use alloc::vec::Vec;

use super::raster::cubic_point;
use super::{Bitmap, BezierPath, DigitError, DigitSemantic, COORD_MAX, COORD_MIN};
use crate::geom::{point_segment_distance, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorizeConfig {
    /// Foreground threshold (iso-level of the traced contour).
    pub threshold: f32,
    /// Douglas-Peucker tolerance for the initial breakpoints, in pixels.
    pub simplify_tolerance: f64,
    /// Maximum deviation of a fitted cubic from the contour, in pixels.
    pub max_error: f64,
    /// Contours enclosing less area than this are dropped as specks.
    pub min_area: f64,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            simplify_tolerance: 1.0,
            max_error: 0.8,
            min_area: 0.5,
        }
    }
}

pub fn vectorize(bitmap: &Bitmap) -> Result<DigitSemantic, DigitError> {
    vectorize_with(bitmap, &VectorizeConfig::default())
}

pub fn vectorize_with(bitmap: &Bitmap, cfg: &VectorizeConfig) -> Result<DigitSemantic, DigitError> {
    if !bitmap.pixels.iter().any(|&p| p >= cfg.threshold) {
        return Err(DigitError::EmptyInput);
    }
    let mut loops = trace_contours(bitmap, cfg.threshold);
    let areas: Vec<f64> = loops.iter().map(|l| polygon_area(l).abs()).collect();
    let largest = areas
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i);
    let mut kept = Vec::new();
    for (i, l) in loops.drain(..).enumerate() {
        if areas[i] >= cfg.min_area || Some(i) == largest {
            kept.push(l);
        }
    }
    let paths = kept
        .iter()
        .filter(|l| l.len() >= 3)
        .map(|l| fit_loop(l, cfg))
        .collect();
    Ok(DigitSemantic::new(paths))
}

/// Closed iso-contours at `threshold`, sampling pixel centres on a grid
/// padded with a one-pixel background border.
fn trace_contours(bmp: &Bitmap, threshold: f32) -> Vec<Vec<Vec2>> {
    let (w, h) = (bmp.width as i32, bmp.height as i32);
    let value = |r: i32, c: i32| -> f32 {
        if r < 0 || c < 0 || r >= h || c >= w {
            0.0
        } else {
            bmp.at(r as usize, c as usize)
        }
    };
    // Edge ids over the padded grid of (h + 2) x (w + 2) samples.
    let gw = (w + 2) as usize;
    let gh = (h + 2) as usize;
    let horizontal = |r: i32, c: i32| ((r + 1) as usize * gw + (c + 1) as usize) * 2;
    let vertical = |r: i32, c: i32| ((r + 1) as usize * gw + (c + 1) as usize) * 2 + 1;
    let crossing = |edge: usize| -> Vec2 {
        let cell = edge / 2;
        let r = (cell / gw) as i32 - 1;
        let c = (cell % gw) as i32 - 1;
        let v0 = value(r, c);
        if edge.is_multiple_of(2) {
            let v1 = value(r, c + 1);
            Vec2::new(c as f64 + ((threshold - v0) / (v1 - v0)) as f64, r as f64)
        } else {
            let v1 = value(r + 1, c);
            Vec2::new(c as f64, r as f64 + ((threshold - v0) / (v1 - v0)) as f64)
        }
    };

    let mut segments: Vec<[usize; 2]> = Vec::new();
    for r in -1..h {
        for c in -1..w {
            let tl = value(r, c) >= threshold;
            let tr = value(r, c + 1) >= threshold;
            let br = value(r + 1, c + 1) >= threshold;
            let bl = value(r + 1, c) >= threshold;
            let top = horizontal(r, c);
            let bottom = horizontal(r + 1, c);
            let left = vertical(r, c);
            let right = vertical(r, c + 1);
            let case = (tl as u8) << 3 | (tr as u8) << 2 | (br as u8) << 1 | bl as u8;
            let centre_in = || {
                (value(r, c) + value(r, c + 1) + value(r + 1, c + 1) + value(r + 1, c)) / 4.0 >= threshold
            };
            match case {
                1 | 14 => segments.push([left, bottom]),
                2 | 13 => segments.push([bottom, right]),
                3 | 12 => segments.push([left, right]),
                4 | 11 => segments.push([top, right]),
                6 | 9 => segments.push([top, bottom]),
                7 | 8 => segments.push([left, top]),
                5 => {
                    if centre_in() {
                        segments.push([left, top]);
                        segments.push([bottom, right]);
                    } else {
                        segments.push([left, bottom]);
                        segments.push([top, right]);
                    }
                }
                10 => {
                    if centre_in() {
                        segments.push([top, right]);
                        segments.push([left, bottom]);
                    } else {
                        segments.push([left, top]);
                        segments.push([bottom, right]);
                    }
                }
                _ => {}
            }
        }
    }

    const NONE: usize = usize::MAX;
    let mut incident = vec![[NONE, NONE]; gw * gh * 2];
    for (s, seg) in segments.iter().enumerate() {
        for &e in seg {
            let slot = &mut incident[e];
            if slot[0] == NONE {
                slot[0] = s;
            } else {
                slot[1] = s;
            }
        }
    }

    let mut visited = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut points = vec![crossing(segments[start][0])];
        let mut edge = segments[start][1];
        let mut prev = start;
        loop {
            let [a, b] = incident[edge];
            let next = if a == prev { b } else { a };
            if next == NONE || next == start {
                break;
            }
            points.push(crossing(edge));
            visited[next] = true;
            let [e0, e1] = segments[next];
            edge = if e0 == edge { e1 } else { e0 };
            prev = next;
        }
        points.push(crossing(edge));
        points.dedup_by(|a, b| a.distance(*b) < 1e-9);
        while points.len() > 1 && points[0].distance(points[points.len() - 1]) < 1e-9 {
            points.pop();
        }
        loops.push(points);
    }
    loops
}

fn polygon_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    (0..n).map(|i| points[i].cross(points[(i + 1) % n])).sum::<f64>() / 2.0
}

/// Indices kept by Douglas-Peucker on the open run `points[lo..=hi]`.
fn douglas_peucker(points: &[Vec2], lo: usize, hi: usize, tol: f64, keep: &mut Vec<usize>) {
    if hi <= lo + 1 {
        return;
    }
    let (mut worst, mut worst_d) = (lo, -1.0);
    for i in lo + 1..hi {
        let (d, _) = point_segment_distance(points[i], points[lo], points[hi]);
        if d > worst_d {
            worst = i;
            worst_d = d;
        }
    }
    if worst_d > tol {
        douglas_peucker(points, lo, worst, tol, keep);
        keep.push(worst);
        douglas_peucker(points, worst, hi, tol, keep);
    }
}

fn fit_loop(points: &[Vec2], cfg: &VectorizeConfig) -> BezierPath {
    let n = points.len();
    // Split the closed loop at point 0 and the point farthest from it.
    let far = (1..n)
        .max_by(|&a, &b| {
            points[a]
                .distance(points[0])
                .total_cmp(&points[b].distance(points[0]))
        })
        .unwrap_or(1);
    let mut ring: Vec<Vec2> = points.to_vec();
    ring.push(points[0]);
    let mut keep = vec![0];
    douglas_peucker(&ring, 0, far, cfg.simplify_tolerance, &mut keep);
    keep.push(far);
    douglas_peucker(&ring, far, n, cfg.simplify_tolerance, &mut keep);
    keep.push(n);

    let mut out = Vec::new();
    for pair in keep.windows(2) {
        for seg in fit_cubics(&ring[pair[0]..=pair[1]], cfg.max_error) {
            out.push(clamp(seg[0]));
            out.push(clamp(seg[1]));
            out.push(clamp(seg[2]));
        }
    }
    BezierPath::new(out).expect("loop has at least two spans")
}

fn clamp(p: Vec2) -> Vec2 {
    Vec2::new(p.x.clamp(COORD_MIN, COORD_MAX), p.y.clamp(COORD_MIN, COORD_MAX))
}

/// Cubics approximating the open run `pts` within `max_error`, splitting at
/// the worst-fitting point when one cubic is not enough.
fn fit_cubics(pts: &[Vec2], max_error: f64) -> Vec<[Vec2; 4]> {
    let (seg, worst, err) = fit_cubic(pts);
    if err <= max_error || pts.len() < 4 {
        return vec![seg];
    }
    let split = if worst == 0 || worst == pts.len() - 1 {
        pts.len() / 2
    } else {
        worst
    };
    let mut left = fit_cubics(&pts[..=split], max_error);
    left.extend(fit_cubics(&pts[split..], max_error));
    left
}

/// Least-squares cubic with fixed endpoints. Returns the curve, the index
/// of the worst-fitting point and its distance.
fn fit_cubic(pts: &[Vec2]) -> ([Vec2; 4], usize, f64) {
    let p0 = pts[0];
    let p3 = pts[pts.len() - 1];
    let line = [p0, p0.lerp(p3, 1.0 / 3.0), p0.lerp(p3, 2.0 / 3.0), p3];
    if pts.len() <= 3 {
        let (i, e) = max_error(&line, pts, &chord_params(pts));
        return (line, i, e);
    }
    let mut params = chord_params(pts);
    let mut seg = solve_handles(pts, &params).unwrap_or(line);
    for _ in 0..3 {
        reparameterize(&seg, pts, &mut params);
        if let Some(s) = solve_handles(pts, &params) {
            seg = s;
        }
    }
    let (i, e) = max_error(&seg, pts, &params);
    (seg, i, e)
}

fn chord_params(pts: &[Vec2]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in pts.windows(2) {
        let last = *acc.last().expect("non-empty");
        acc.push(last + w[0].distance(w[1]));
    }
    let total = *acc.last().expect("non-empty");
    if total > 0.0 {
        acc.iter_mut().for_each(|t| *t /= total);
    }
    acc
}

fn bernstein(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t]
}

fn solve_handles(pts: &[Vec2], params: &[f64]) -> Option<[Vec2; 4]> {
    let p0 = pts[0];
    let p3 = pts[pts.len() - 1];
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let (mut r1, mut r2) = (Vec2::ZERO, Vec2::ZERO);
    for (&q, &t) in pts.iter().zip(params) {
        let b = bernstein(t);
        let r = q - (p0 * b[0] + p3 * b[3]);
        a11 += b[1] * b[1];
        a12 += b[1] * b[2];
        a22 += b[2] * b[2];
        r1 += r * b[1];
        r2 += r * b[2];
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 {
        return None;
    }
    let c1 = (r1 * a22 - r2 * a12) * (1.0 / det);
    let c2 = (r2 * a11 - r1 * a12) * (1.0 / det);
    Some([p0, c1, c2, p3])
}

/// One Newton step per point towards its closest curve parameter.
fn reparameterize(seg: &[Vec2; 4], pts: &[Vec2], params: &mut [f64]) {
    let d1 = [(seg[1] - seg[0]) * 3.0, (seg[2] - seg[1]) * 3.0, (seg[3] - seg[2]) * 3.0];
    let d2 = [(d1[1] - d1[0]) * 2.0, (d1[2] - d1[1]) * 2.0];
    let last = params.len() - 1;
    for (i, (t, &q)) in params.iter_mut().zip(pts).enumerate() {
        if i == 0 || i == last {
            continue;
        }
        let u = 1.0 - *t;
        let p = cubic_point(seg, *t);
        let dp = d1[0] * (u * u) + d1[1] * (2.0 * u * *t) + d1[2] * (*t * *t);
        let ddp = d2[0] * u + d2[1] * *t;
        let diff = p - q;
        let num = diff.dot(dp);
        let den = dp.dot(dp) + diff.dot(ddp);
        if den.abs() > 1e-12 {
            *t = (*t - num / den).clamp(0.0, 1.0);
        }
    }
}

fn max_error(seg: &[Vec2; 4], pts: &[Vec2], params: &[f64]) -> (usize, f64) {
    let mut worst = (0, 0.0);
    for (i, (&q, &t)) in pts.iter().zip(params).enumerate() {
        let d = cubic_point(seg, t).distance(q);
        if d > worst.1 {
            worst = (i, d);
        }
    }
    worst
}
