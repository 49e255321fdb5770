//! Heatmap-sequence aggregation over road sections and lateral mutation of
//! road control points.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{validate_road, Road, RoadError, SimTrace, ROAD_EXTENT};
use crate::focus::{sample_concept, WeightVector};
use crate::geom::Vec2;
use crate::mutate::MutationRecord;
use crate::xai::Heatmap;

/// Per-section sampling weights.
pub type SectionWeights = WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    fn random<R: Rng + ?Sized>(rng: &mut R) -> Side {
        if rng.random_bool(0.5) {
            Side::Left
        } else {
            Side::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadSelection {
    /// Sections weighted by their mean heatmap derivative.
    SectionWeights,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionPolicy {
    /// Towards the half of the view with more attention.
    High,
    /// Away from it.
    Low,
    Random,
}

impl DirectionPolicy {
    pub fn name(self) -> &'static str {
        match self {
            DirectionPolicy::High => "high",
            DirectionPolicy::Low => "low",
            DirectionPolicy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadPolicy {
    pub selection: RoadSelection,
    pub direction: DirectionPolicy,
    pub extent: f64,
    /// Control points tried before the mutation is given up.
    pub max_attempts: usize,
}

impl RoadPolicy {
    pub fn baseline() -> Self {
        Self {
            selection: RoadSelection::Uniform,
            direction: DirectionPolicy::Random,
            extent: ROAD_EXTENT,
            max_attempts: 20,
        }
    }

    pub fn guided(direction: DirectionPolicy) -> Self {
        Self {
            selection: RoadSelection::SectionWeights,
            direction,
            ..Self::baseline()
        }
    }

    pub fn needs_heatmaps(&self) -> bool {
        self.selection == RoadSelection::SectionWeights || self.direction != DirectionPolicy::Random
    }
}

/// Mean absolute pixel difference between two heatmaps.
pub fn heatmap_derivative(prev: &Heatmap, curr: &Heatmap) -> Result<f64, RoadError> {
    let (a, b) = ((prev.height(), prev.width()), (curr.height(), curr.width()));
    if a != b {
        return Err(RoadError::DimensionMismatch(a, b));
    }
    let n = prev.values().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = prev.values().iter().zip(curr.values()).map(|(p, c)| (p - c).abs()).sum();
    Ok(sum / n as f64)
}

/// Heatmaps of the frames in `section`, in time order.
fn section_maps<'a>(trace: &SimTrace, heatmaps: &'a [Heatmap], section: usize) -> Vec<&'a Heatmap> {
    trace
        .steps
        .iter()
        .zip(heatmaps)
        .filter(|(s, _)| s.section == section)
        .map(|(_, h)| h)
        .collect()
}

/// For each of `sections` sections: the sum of derivatives between its
/// consecutive heatmaps divided by its frame count. Sections with fewer than
/// two frames score zero.
pub fn section_weights(trace: &SimTrace, heatmaps: &[Heatmap], sections: usize) -> Result<SectionWeights, RoadError> {
    let mut raw = vec![0.0; sections];
    for (k, w) in raw.iter_mut().enumerate() {
        let maps = section_maps(trace, heatmaps, k);
        if maps.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        for pair in maps.windows(2) {
            sum += heatmap_derivative(pair[0], pair[1])?;
        }
        *w = sum / maps.len() as f64;
    }
    Ok(WeightVector::from_raw(raw))
}

/// Mean intensity of the left columns `[0, w/2)` and the right columns
/// `[w/2 + 1, w)` over all maps.
fn side_means(maps: &[&Heatmap]) -> (f64, f64) {
    let (mut left, mut nl, mut right, mut nr) = (0.0, 0usize, 0.0, 0usize);
    for h in maps {
        let w = h.width();
        for r in 0..h.height() {
            for c in 0..w / 2 {
                left += h.at(r, c);
                nl += 1;
            }
            for c in w / 2 + 1..w {
                right += h.at(r, c);
                nr += 1;
            }
        }
    }
    (left / nl.max(1) as f64, right / nr.max(1) as f64)
}

/// Side to push a control point towards, and whether the policy had to
/// fall back to a coin flip (no maps, or equal attention on both sides).
pub fn mutation_direction<R: Rng + ?Sized>(maps: &[&Heatmap], policy: DirectionPolicy, rng: &mut R) -> (Side, bool) {
    if policy == DirectionPolicy::Random {
        return (Side::random(rng), false);
    }
    let (left, right) = side_means(maps);
    if maps.is_empty() || left == right {
        return (Side::random(rng), true);
    }
    let hot = if left > right { Side::Left } else { Side::Right };
    match policy {
        DirectionPolicy::High => (hot, false),
        _ => (hot.opposite(), false),
    }
}

/// Moves control point `k` by `extent` along the centerline normal.
pub fn mutate_road(road: &Road, k: usize, side: Side, extent: f64) -> Result<Road, RoadError> {
    if k >= road.control_points().len() {
        return Err(RoadError::BadIndex {
            index: k,
            len: road.control_points().len(),
        });
    }
    let p = road.control_points()[k] + road.normal_at_control(k) * (side.sign() * extent);
    road.with_point(k, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadMutation {
    pub road: Road,
    pub record: MutationRecord,
}

/// Samples a control point from `weights` and a side, then mutates; an
/// invalid result is retried on the other side, then with a fresh sample.
pub fn apply_policy<R: Rng + ?Sized>(
    road: &Road,
    weights: &WeightVector,
    mut side_for: impl FnMut(usize, &mut R) -> (Side, bool),
    policy: &RoadPolicy,
    rng: &mut R,
) -> Result<RoadMutation, RoadError> {
    for _ in 0..policy.max_attempts {
        let k = sample_concept(weights, rng);
        let (side, fallback) = side_for(k, rng);
        for s in [side, side.opposite()] {
            let candidate = mutate_road(road, k, s, policy.extent)?;
            if validate_road(&candidate) {
                let direction: Vec2 = road.normal_at_control(k) * s.sign();
                return Ok(RoadMutation {
                    road: candidate,
                    record: MutationRecord {
                        index: k,
                        direction,
                        extent: policy.extent,
                        fallback,
                        degenerate_weights: weights.is_degenerate(),
                        clamped: false,
                    },
                });
            }
        }
    }
    Err(RoadError::MutationFailed(policy.max_attempts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqdMetric {
    MaxCte,
    SteeringNorm,
}

impl DqdMetric {
    pub fn name(self) -> &'static str {
        match self {
            DqdMetric::MaxCte => "max_cte",
            DqdMetric::SteeringNorm => "steering_norm",
        }
    }

    fn apply<'a>(self, steps: impl Iterator<Item = &'a super::SimStep>) -> f64 {
        match self {
            DqdMetric::MaxCte => steps.map(|s| s.cte.abs()).fold(0.0, f64::max),
            DqdMetric::SteeringNorm => libm::sqrt(steps.map(|s| s.steering * s.steering).sum()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqdValue {
    pub value: f64,
    /// A trace did not cover the section in full; the metric used what the
    /// trace had.
    pub partial: bool,
}

/// Driving quality on `section` after the mutation minus before it. A
/// trace that never reaches the section contributes its whole prefix.
pub fn dqd(before: &SimTrace, after: &SimTrace, section: usize, metric: DqdMetric) -> DqdValue {
    let quality = |t: &SimTrace| {
        let present = t.steps.iter().any(|s| s.section == section);
        if present {
            let ended_inside = t.oob && t.steps.last().is_some_and(|s| s.section == section);
            (metric.apply(t.steps.iter().filter(|s| s.section == section)), ended_inside)
        } else {
            (metric.apply(t.steps.iter()), true)
        }
    };
    let (b, pb) = quality(before);
    let (a, pa) = quality(after);
    DqdValue {
        value: a - b,
        partial: pb || pa,
    }
}
