//! One mutation of a digit's control points, guided by a heatmap or random.

use core::f64::consts::TAU;

use rand::Rng;

use crate::digit::{DigitError, DigitSemantic};
use crate::focus::{
    attractor, cluster_partition, cluster_weights, sample_concept, window_weights, SquareWindowParams,
    WeightVector,
};
use crate::geom::Vec2;
use crate::xai::Heatmap;

/// Largest displacement, in pixels, of a digit control point.
pub const DIGIT_MAX_EXTENT: f64 = 1.2;

/// Below this distance a point is considered to sit on its attractor.
const ATTRACTOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Window(SquareWindowParams),
    Cluster,
    Uniform,
}

impl Selection {
    pub fn name(self) -> &'static str {
        match self {
            Selection::Window(_) => "window",
            Selection::Cluster => "cluster",
            Selection::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionMode {
    Attractor,
    Random,
}

impl DirectionMode {
    pub fn name(self) -> &'static str {
        match self {
            DirectionMode::Attractor => "attractor",
            DirectionMode::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationPolicy {
    pub selection: Selection,
    pub direction: DirectionMode,
    pub max_extent: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MutateError {
    #[error("attractor direction requires cluster selection")]
    AttractorWithoutCluster,
    #[error("extent bound must be finite and non-negative")]
    BadExtent,
    #[error("guided selection requires a heatmap")]
    MissingHeatmap,
    #[error("heatmap is {got:?}, expected {expected:?}")]
    HeatmapSize { got: (usize, usize), expected: (usize, usize) },
    #[error(transparent)]
    Digit(#[from] DigitError),
}

impl MutationPolicy {
    /// Uniform selection with a random direction.
    pub fn baseline() -> Self {
        Self {
            selection: Selection::Uniform,
            direction: DirectionMode::Random,
            max_extent: DIGIT_MAX_EXTENT,
        }
    }

    pub fn guided(selection: Selection, direction: DirectionMode) -> Self {
        Self {
            selection,
            direction,
            max_extent: DIGIT_MAX_EXTENT,
        }
    }

    pub fn validate(&self) -> Result<(), MutateError> {
        if self.direction == DirectionMode::Attractor && self.selection != Selection::Cluster {
            return Err(MutateError::AttractorWithoutCluster);
        }
        if !(self.max_extent >= 0.0 && self.max_extent.is_finite()) {
            return Err(MutateError::BadExtent);
        }
        Ok(())
    }

    /// True when the policy consumes a heatmap.
    pub fn needs_heatmap(&self) -> bool {
        self.selection != Selection::Uniform
    }
}

/// What a single mutation did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationRecord {
    /// Control point that was moved.
    pub index: usize,
    /// Unit direction of the move.
    pub direction: Vec2,
    pub extent: f64,
    /// The policy asked for an attractor but none was usable.
    pub fallback: bool,
    /// The weights were replaced by uniform ones (cold heatmap).
    pub degenerate_weights: bool,
    /// The moved point was clamped to the coordinate margin.
    pub clamped: bool,
}

pub fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    Vec2::from_angle(rng.random_range(0.0..TAU))
}

/// Displaces one control point of `sem`. `heatmap` must be the thresholded
/// explanation of `rasterize(sem)`; it is ignored by uniform selection.
pub fn mutate_digit<R: Rng + ?Sized>(
    sem: &DigitSemantic,
    heatmap: Option<&Heatmap>,
    policy: &MutationPolicy,
    rng: &mut R,
) -> Result<(DigitSemantic, MutationRecord), MutateError> {
    policy.validate()?;
    if sem.is_empty() {
        return Err(DigitError::EmptyInput.into());
    }
    let points = sem.control_points();
    let h = match (policy.needs_heatmap(), heatmap) {
        (false, _) => None,
        (true, None) => return Err(MutateError::MissingHeatmap),
        (true, Some(h)) => {
            let expected = (crate::digit::SIDE, crate::digit::SIDE);
            if (h.height(), h.width()) != expected {
                return Err(MutateError::HeatmapSize {
                    got: (h.height(), h.width()),
                    expected,
                });
            }
            Some(h)
        }
    };

    let (weights, clusters) = match (policy.selection, h) {
        (Selection::Window(params), Some(h)) => (window_weights(h, &points, params), None),
        (Selection::Cluster, Some(h)) => {
            let a = cluster_partition(h, &points);
            (cluster_weights(&a, &points), Some(a))
        }
        _ => (WeightVector::uniform(points.len()), None),
    };
    let index = sample_concept(&weights, rng);

    let towards = match (policy.direction, &clusters) {
        (DirectionMode::Attractor, Some(a)) => attractor(a, index)
            .and_then(|c| {
                let v = c - points[index].position;
                (v.norm() >= ATTRACTOR_EPS).then(|| v.normalized()).flatten()
            }),
        _ => None,
    };
    let fallback = policy.direction == DirectionMode::Attractor && towards.is_none();
    let direction = match towards {
        Some(d) => d,
        None => random_direction(rng),
    };
    let extent = rng.random_range(0.0..=policy.max_extent);
    let displaced = sem.displace(index, direction, extent)?;
    Ok((
        displaced.semantic,
        MutationRecord {
            index,
            direction,
            extent,
            fallback,
            degenerate_weights: weights.is_degenerate(),
            clamped: displaced.clamped,
        },
    ))
}
