//! Two-lane roads on a Catmull-Rom centerline, a closed-loop toy driver and
//! the heatmap-sequence aggregation used to mutate them.
//!
//! World coordinates are y-up; "left" is the counter-clockwise normal of the
//! direction of travel.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::geom::{segments_intersect, Vec2};

mod guide;
mod sim;
mod subject;

pub use guide::{
    apply_policy, dqd, heatmap_derivative, mutate_road, mutation_direction, section_weights, DirectionPolicy,
    DqdMetric, DqdValue, RoadMutation, RoadPolicy, RoadSelection, SectionWeights, Side,
};
pub use sim::{
    pure_pursuit, render_frame, simulate, simulate_with, Driver, FrameConfig, Pose, SimConfig, SimStep, SimTrace,
};
pub use subject::{behaviour_cloning_set, BcConfig, RoadFuzzError, RoadSubject};

pub const ROAD_WIDTH: f64 = 8.0;
pub const CONTROL_POINTS: usize = 12;
pub const BOX_SIZE: f64 = 250.0;
/// Lateral displacement of a mutated control point.
pub const ROAD_EXTENT: f64 = 4.0;
/// Distance between consecutive centerline samples.
pub const SAMPLE_SPACING: f64 = 1.0;

const SPAN_SUBDIVISIONS: usize = 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RoadError {
    #[error("a road needs at least two control points, got {0}")]
    TooFewPoints(usize),
    #[error("no valid road after {0} attempts")]
    GenerationFailed(usize),
    #[error("no valid mutation after {0} attempts")]
    MutationFailed(usize),
    #[error("heatmaps differ in size: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("control point {index} out of range for {len} points")]
    BadIndex { index: usize, len: usize },
    #[error("invalid road configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Control points plus the centerline sampled from them.
#[derive(Debug, Clone)]
pub struct Road {
    control_points: Vec<Vec2>,
    width: f64,
    centerline: Vec<Vec2>,
    /// Section (index of the control point that starts the span) per sample.
    sections: Vec<usize>,
}

impl PartialEq for Road {
    fn eq(&self, other: &Self) -> bool {
        self.control_points == other.control_points && self.width == other.width
    }
}

impl Road {
    pub fn new(control_points: Vec<Vec2>, width: f64) -> Result<Self, RoadError> {
        if control_points.len() < 2 {
            return Err(RoadError::TooFewPoints(control_points.len()));
        }
        let (centerline, sections) = sample_centerline(&control_points);
        Ok(Self {
            control_points,
            width,
            centerline,
            sections,
        })
    }

    pub fn control_points(&self) -> &[Vec2] {
        &self.control_points
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Centerline sampled every [`SAMPLE_SPACING`] units (last gap shorter).
    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    /// Section of each centerline sample. Section `k` runs from control point
    /// `k` to `k + 1`; the last control point's section is empty.
    pub fn sections(&self) -> &[usize] {
        &self.sections
    }

    pub fn section_count(&self) -> usize {
        self.control_points.len()
    }

    pub fn length(&self) -> f64 {
        self.centerline.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Unit direction of travel at centerline sample `i`.
    pub fn tangent(&self, i: usize) -> Vec2 {
        let n = self.centerline.len();
        let (a, b) = if i + 1 < n { (i, i + 1) } else { (n - 2, n - 1) };
        (self.centerline[b] - self.centerline[a])
            .normalized()
            .unwrap_or(Vec2::new(1.0, 0.0))
    }

    /// Left unit normal of the centerline at control point `k`.
    pub fn normal_at_control(&self, k: usize) -> Vec2 {
        let pts = &self.control_points;
        let n = pts.len();
        let prev = if k == 0 { pts[0] * 2.0 - pts[1] } else { pts[k - 1] };
        let next = if k + 1 == n { pts[n - 1] * 2.0 - pts[n - 2] } else { pts[k + 1] };
        (next - prev).normalized().unwrap_or(Vec2::new(1.0, 0.0)).perp()
    }

    /// Copy with control point `k` moved to `p`.
    pub fn with_point(&self, k: usize, p: Vec2) -> Result<Self, RoadError> {
        if k >= self.control_points.len() {
            return Err(RoadError::BadIndex {
                index: k,
                len: self.control_points.len(),
            });
        }
        let mut pts = self.control_points.clone();
        pts[k] = p;
        Self::new(pts, self.width)
    }

    /// Left and right road edges at every other centerline sample.
    pub fn edges(&self) -> (Vec<Vec2>, Vec<Vec2>) {
        let half = self.width / 2.0;
        let n = self.centerline.len();
        let mut idx: Vec<usize> = (0..n).step_by(2).collect();
        if idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        let left = idx
            .iter()
            .map(|&i| self.centerline[i] + self.tangent(i).perp() * half)
            .collect();
        let right = idx
            .iter()
            .map(|&i| self.centerline[i] - self.tangent(i).perp() * half)
            .collect();
        (left, right)
    }
}

/// Centripetal Catmull-Rom through `pts`, with reflected phantom points at
/// both ends, resampled at fixed arc length.
fn sample_centerline(pts: &[Vec2]) -> (Vec<Vec2>, Vec<usize>) {
    let n = pts.len();
    let mut ext = Vec::with_capacity(n + 2);
    ext.push(pts[0] * 2.0 - pts[1]);
    ext.extend_from_slice(pts);
    ext.push(pts[n - 1] * 2.0 - pts[n - 2]);

    let mut dense = Vec::new();
    let mut dense_span = Vec::new();
    for span in 0..n - 1 {
        let p = [ext[span], ext[span + 1], ext[span + 2], ext[span + 3]];
        for s in 0..SPAN_SUBDIVISIONS {
            dense.push(catmull_rom(&p, s as f64 / SPAN_SUBDIVISIONS as f64));
            dense_span.push(span);
        }
    }
    dense.push(pts[n - 1]);
    dense_span.push(n - 2);

    let mut out = alloc::vec![dense[0]];
    let mut sections = alloc::vec![0];
    let mut carry = 0.0;
    for i in 0..dense.len() - 1 {
        let (a, b) = (dense[i], dense[i + 1]);
        let len = a.distance(b);
        let mut s = SAMPLE_SPACING - carry;
        while s <= len {
            out.push(a.lerp(b, s / len));
            sections.push(dense_span[i]);
            s += SAMPLE_SPACING;
        }
        carry = len - (s - SAMPLE_SPACING);
    }
    let end = pts[n - 1];
    if out.last().is_none_or(|p| p.distance(end) > 1e-9) {
        out.push(end);
        sections.push(n - 2);
    }
    (out, sections)
}

/// Point at fraction `u` of the span between `p[1]` and `p[2]`.
fn catmull_rom(p: &[Vec2; 4], u: f64) -> Vec2 {
    let knot = |a: Vec2, b: Vec2| libm::sqrt(a.distance(b)).max(1e-9);
    let t0 = 0.0;
    let t1 = t0 + knot(p[0], p[1]);
    let t2 = t1 + knot(p[1], p[2]);
    let t3 = t2 + knot(p[2], p[3]);
    let t = t1 + (t2 - t1) * u;
    let mix = |a: Vec2, b: Vec2, ta: f64, tb: f64| a * ((tb - t) / (tb - ta)) + b * ((t - ta) / (tb - ta));
    let a1 = mix(p[0], p[1], t0, t1);
    let a2 = mix(p[1], p[2], t1, t2);
    let a3 = mix(p[2], p[3], t2, t3);
    let b1 = mix(a1, a2, t0, t2);
    let b2 = mix(a2, a3, t1, t3);
    mix(b1, b2, t1, t2)
}

/// Start and end differ, the whole road lies in the box, and it neither
/// crosses nor brushes against itself.
pub fn validate_road(road: &Road) -> bool {
    validate_in_box(road, BOX_SIZE)
}

pub fn validate_in_box(road: &Road, box_size: f64) -> bool {
    let pts = road.control_points();
    if pts[0].distance(pts[pts.len() - 1]) <= 1e-9 {
        return false;
    }
    if pts.windows(2).any(|w| w[0].distance(w[1]) < 1e-6) {
        return false;
    }
    let (left, right) = road.edges();
    let inside = |p: &Vec2| (0.0..=box_size).contains(&p.x) && (0.0..=box_size).contains(&p.y);
    if !road.centerline().iter().all(inside) || !left.iter().all(inside) || !right.iter().all(inside) {
        return false;
    }
    if polyline_self_intersects(&left) || polyline_self_intersects(&right) || polylines_cross(&left, &right) {
        return false;
    }
    !brushes_itself(road)
}

fn polyline_self_intersects(p: &[Vec2]) -> bool {
    for i in 0..p.len().saturating_sub(1) {
        for j in i + 2..p.len() - 1 {
            if segments_intersect(p[i], p[i + 1], p[j], p[j + 1]) {
                return true;
            }
        }
    }
    false
}

fn polylines_cross(a: &[Vec2], b: &[Vec2]) -> bool {
    for i in 0..a.len() - 1 {
        for j in 0..b.len() - 1 {
            if segments_intersect(a[i], a[i + 1], b[j], b[j + 1]) {
                return true;
            }
        }
    }
    false
}

/// Two parts of the road far apart along the centerline but closer than the
/// road width overlap even when their edges run parallel.
fn brushes_itself(road: &Road) -> bool {
    let c = road.centerline();
    let w = road.width();
    let gap = (2.0 * w / SAMPLE_SPACING) as usize;
    for i in 0..c.len() {
        for j in i + gap..c.len() {
            if c[i].distance(c[j]) < w {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGenConfig {
    pub control_points: usize,
    /// Distance between consecutive control points.
    pub segment_length: f64,
    /// Largest heading change between consecutive control-point segments.
    pub max_turn: f64,
    pub box_size: f64,
    pub width: f64,
    pub max_attempts: usize,
}

impl Default for RoadGenConfig {
    fn default() -> Self {
        Self {
            control_points: CONTROL_POINTS,
            segment_length: 20.0,
            max_turn: 70.0_f64.to_radians(),
            box_size: BOX_SIZE,
            width: ROAD_WIDTH,
            max_attempts: 100,
        }
    }
}

impl RoadGenConfig {
    pub fn validate(&self) -> Result<(), RoadError> {
        if self.control_points < 2 {
            return Err(RoadError::InvalidConfig("at least two control points"));
        }
        if !(self.segment_length > 0.0 && self.box_size > 0.0 && self.width > 0.0) {
            return Err(RoadError::InvalidConfig("lengths must be positive"));
        }
        if !(0.0..=PI).contains(&self.max_turn) {
            return Err(RoadError::InvalidConfig("max turn must lie in [0, pi]"));
        }
        if self.max_attempts == 0 {
            return Err(RoadError::InvalidConfig("at least one attempt"));
        }
        Ok(())
    }
}

/// Random walk of control points entering from the bottom edge of the box,
/// retried until the road is valid.
pub fn generate_road<R: Rng + ?Sized>(rng: &mut R, cfg: &RoadGenConfig) -> Result<Road, RoadError> {
    cfg.validate()?;
    let margin = cfg.width;
    for _ in 0..cfg.max_attempts {
        let mut p = Vec2::new(rng.random_range(0.2 * cfg.box_size..0.8 * cfg.box_size), margin + 1.0);
        let mut heading = PI / 2.0 + rng.random_range(-PI / 6.0..PI / 6.0);
        let mut pts = alloc::vec![p];
        for i in 1..cfg.control_points {
            if i > 1 {
                heading += rng.random_range(-cfg.max_turn..=cfg.max_turn);
            }
            p += Vec2::from_angle(heading) * cfg.segment_length;
            pts.push(p);
        }
        let road = Road::new(pts, cfg.width)?;
        if validate_in_box(&road, cfg.box_size) {
            return Ok(road);
        }
    }
    Err(RoadError::GenerationFailed(cfg.max_attempts))
}

/// Heading changes, in radians, between consecutive control-point segments.
pub fn turn_angles(road: &Road) -> Vec<f64> {
    let pts = road.control_points();
    pts.windows(3)
        .map(|w| crate::geom::wrap_angle((w[2] - w[1]).angle() - (w[1] - w[0]).angle()))
        .collect()
}

#[cfg(test)]
mod tests;
