//! Digits as closed cubic Bézier paths.
//!
//! Coordinates are in pixel units of the canvas with pixel `(row, col)`
//! centred at `(x = col, y = row)`. [`vectorize`] traces a bitmap into
//! [`DigitSemantic`] control points and [`rasterize`] renders them back with
//! anti-aliasing.

mod raster;
mod vectorize;

use alloc::vec::Vec;

use crate::geom::Vec2;
use crate::tensor::Tensor;

pub use raster::rasterize;
pub use vectorize::{vectorize, vectorize_with, VectorizeConfig};

/// Canvas side length.
pub const SIDE: usize = 28;
/// Control points are clamped to `[COORD_MIN, COORD_MAX]` on both axes.
pub const COORD_MIN: f64 = -4.0;
pub const COORD_MAX: f64 = 32.0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DigitError {
    #[error("bitmap has no foreground pixels")]
    EmptyInput,
    #[error("bitmap must have {expected} pixels, got {actual}")]
    BadSize { expected: usize, actual: usize },
    #[error("control point index {index} out of range ({len} points)")]
    BadIndex { index: usize, len: usize },
}

/// Grayscale image with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl Bitmap {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self, DigitError> {
        if pixels.len() != width * height {
            return Err(DigitError::BadSize {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: alloc::vec![0.0; width * height],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self, DigitError> {
        let s = t.shape();
        Self::new(s[s.len() - 1], s[s.len() - 2], t.data().to_vec())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::image(self.height, self.width, self.pixels.clone()).expect("bitmap dims")
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0.0)
    }

    pub fn binarize(&self, threshold: f32) -> Vec<bool> {
        self.pixels.iter().map(|&p| p >= threshold).collect()
    }

    /// Intersection over union of the two bitmaps binarised at `threshold`.
    pub fn iou(&self, other: &Bitmap, threshold: f32) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.pixels.iter().zip(&other.pixels) {
            let (a, b) = (a >= threshold, b >= threshold);
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Intensity-weighted centre of mass.
    pub fn centroid(&self) -> Option<Vec2> {
        let mut total = 0.0f64;
        let mut acc = Vec2::ZERO;
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.at(r, c) as f64;
                total += v;
                acc += Vec2::new(c as f64, r as f64) * v;
            }
        }
        (total > 0.0).then(|| acc * (1.0 / total))
    }
}

/// One closed path of cubic segments. Points are stored as
/// `[P0, C0a, C0b, P1, C1a, C1b, ...]`: segment `k` runs from on-curve point
/// `3k` through handles `3k+1`, `3k+2` to on-curve point `3(k+1) mod len`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierPath {
    points: Vec<Vec2>,
}

impl BezierPath {
    pub fn new(points: Vec<Vec2>) -> Option<Self> {
        (points.len() >= 3 && points.len().is_multiple_of(3)).then_some(Self { points })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() / 3
    }

    pub fn segment(&self, k: usize) -> [Vec2; 4] {
        let n = self.points.len();
        [
            self.points[3 * k],
            self.points[3 * k + 1],
            self.points[3 * k + 2],
            self.points[(3 * k + 3) % n],
        ]
    }
}

/// Semantic representation of a digit: its closed Bézier outlines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DigitSemantic {
    paths: Vec<BezierPath>,
}

/// A control point by flat index, with its coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPointRef {
    pub index: usize,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Displaced {
    pub semantic: DigitSemantic,
    /// The moved point left the canvas margin and was clamped.
    pub clamped: bool,
}

impl DigitSemantic {
    pub fn new(paths: Vec<BezierPath>) -> Self {
        Self { paths }
    }

    pub fn paths(&self) -> &[BezierPath] {
        &self.paths
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.paths.iter().map(|p| p.points.len()).sum()
    }

    /// Every control point (on- and off-curve) in flat index order.
    pub fn control_points(&self) -> Vec<ControlPointRef> {
        self.paths
            .iter()
            .flat_map(|p| p.points.iter().copied())
            .enumerate()
            .map(|(index, position)| ControlPointRef { index, position })
            .collect()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.paths
            .iter()
            .flat_map(|p| p.points.iter().copied())
            .collect()
    }

    fn locate(&self, index: usize) -> Result<(usize, usize), DigitError> {
        let mut rest = index;
        for (pi, p) in self.paths.iter().enumerate() {
            if rest < p.points.len() {
                return Ok((pi, rest));
            }
            rest -= p.points.len();
        }
        Err(DigitError::BadIndex {
            index,
            len: self.point_count(),
        })
    }

    pub fn point(&self, index: usize) -> Result<ControlPointRef, DigitError> {
        let (p, i) = self.locate(index)?;
        Ok(ControlPointRef {
            index,
            position: self.paths[p].points[i],
        })
    }

    /// True for points the curve passes through (segment endpoints).
    pub fn is_on_curve(&self, index: usize) -> Result<bool, DigitError> {
        self.locate(index).map(|(_, i)| i % 3 == 0)
    }

    /// Moves point `index` by `extent * direction`. Only that point changes;
    /// a result outside the canvas margin is clamped and flagged.
    pub fn displace(&self, index: usize, direction: Vec2, extent: f64) -> Result<Displaced, DigitError> {
        let (p, i) = self.locate(index)?;
        let mut semantic = self.clone();
        let target = semantic.paths[p].points[i] + direction * extent;
        let clamped_target = Vec2::new(
            target.x.clamp(COORD_MIN, COORD_MAX),
            target.y.clamp(COORD_MIN, COORD_MAX),
        );
        semantic.paths[p].points[i] = clamped_target;
        Ok(Displaced {
            semantic,
            clamped: clamped_target != target,
        })
    }

    pub fn translated(&self, offset: Vec2) -> Self {
        Self {
            paths: self
                .paths
                .iter()
                .map(|p| BezierPath {
                    points: p.points.iter().map(|&q| q + offset).collect(),
                })
                .collect(),
        }
    }
}
