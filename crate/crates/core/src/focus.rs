//! From a heatmap and control points to sampling weights and attractors.
//!
//! Pixel `(row, col)` sits at coordinates `(x = col, y = row)`, the same frame
//! as digit control points.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::digit::ControlPointRef;
use crate::geom::Vec2;
use crate::xai::Heatmap;

/// Normalised importance of each control point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    raw: Vec<f64>,
    degenerate: bool,
}

impl WeightVector {
    /// Normalises `raw`; an empty or all-zero vector becomes uniform and is
    /// flagged degenerate.
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        if raw.is_empty() || !(total > 0.0) {
            return Self::uniform_from(raw);
        }
        Self {
            weights: raw.iter().map(|w| w / total).collect(),
            raw,
            degenerate: false,
        }
    }

    pub fn uniform(n: usize) -> Self {
        let mut w = Self::uniform_from(vec![1.0; n]);
        w.degenerate = false;
        w
    }

    fn uniform_from(raw: Vec<f64>) -> Self {
        let n = raw.len();
        Self {
            weights: vec![1.0 / n as f64; n],
            raw,
            degenerate: true,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights before normalisation.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True when the raw weights were all zero and uniform weights were
    /// substituted.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Index of the largest weight (lowest index on ties).
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &w) in self.weights.iter().enumerate() {
            if best.is_none_or(|(_, b)| w > b) {
                best = Some((i, w));
            }
        }
        best.map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareWindowParams {
    pub d: usize,
}

impl SquareWindowParams {
    pub fn window_size(self) -> usize {
        2 * self.d + 1
    }
}

impl Default for SquareWindowParams {
    fn default() -> Self {
        Self { d: 1 }
    }
}

/// Pixel nearest to a point, which may fall outside the image.
fn nearest_pixel(p: Vec2) -> (i64, i64) {
    (libm::round(p.y) as i64, libm::round(p.x) as i64)
}

/// Mean heatmap intensity in the `(2d+1)²` window around each point. Cells
/// outside the image are skipped; a window with no cells inside scores zero.
pub fn window_weights(h: &Heatmap, points: &[ControlPointRef], params: SquareWindowParams) -> WeightVector {
    let d = params.d as i64;
    let (hh, ww) = (h.height() as i64, h.width() as i64);
    let raw = points
        .iter()
        .map(|cp| {
            let (r0, c0) = nearest_pixel(cp.position);
            let (rlo, rhi) = ((r0 - d).max(0), (r0 + d).min(hh - 1));
            let (clo, chi) = ((c0 - d).max(0), (c0 + d).min(ww - 1));
            if rlo > rhi || clo > chi {
                return 0.0;
            }
            let mut sum = 0.0;
            for r in rlo..=rhi {
                for c in clo..=chi {
                    sum += h.at(r as usize, c as usize);
                }
            }
            sum / ((rhi - rlo + 1) * (chi - clo + 1)) as f64
        })
        .collect();
    WeightVector::from_raw(raw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterPixel {
    pub row: usize,
    pub col: usize,
    pub intensity: f64,
}

impl ClusterPixel {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.col as f64, self.row as f64)
    }
}

/// Partition of the hot pixels of a heatmap, one cluster per control point.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    width: usize,
    labels: Vec<Option<usize>>,
    clusters: Vec<Vec<ClusterPixel>>,
}

impl ClusterAssignment {
    /// Cluster of pixel `(row, col)`, or `None` for a cold pixel.
    pub fn label(&self, row: usize, col: usize) -> Option<usize> {
        self.labels[row * self.width + col]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn clusters(&self) -> &[Vec<ClusterPixel>] {
        &self.clusters
    }

    pub fn cluster(&self, k: usize) -> &[ClusterPixel] {
        &self.clusters[k]
    }

    /// True when no pixel was hot enough to be assigned.
    pub fn is_degenerate(&self) -> bool {
        self.clusters.iter().all(Vec::is_empty)
    }
}

/// Assigns every pixel with positive intensity to its nearest control point
/// (lowest index on ties). One assignment step, no centroid updates.
pub fn cluster_partition(h: &Heatmap, points: &[ControlPointRef]) -> ClusterAssignment {
    let mut labels = vec![None; h.height() * h.width()];
    let mut clusters = vec![Vec::new(); points.len()];
    for row in 0..h.height() {
        for col in 0..h.width() {
            let intensity = h.at(row, col);
            if !(intensity > 0.0) || points.is_empty() {
                continue;
            }
            let p = Vec2::new(col as f64, row as f64);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, cp) in points.iter().enumerate() {
                let d = (p - cp.position).norm_sq();
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            labels[row * h.width() + col] = Some(best);
            clusters[best].push(ClusterPixel { row, col, intensity });
        }
    }
    ClusterAssignment {
        width: h.width(),
        labels,
        clusters,
    }
}

/// Per-cluster sum of intensity over distance to the cluster's control
/// point, with distances below one clamped to one.
pub fn cluster_weights(a: &ClusterAssignment, points: &[ControlPointRef]) -> WeightVector {
    let raw = a
        .clusters
        .iter()
        .zip(points)
        .map(|(pixels, cp)| {
            pixels
                .iter()
                .map(|px| px.intensity / px.position().distance(cp.position).max(1.0))
                .sum()
        })
        .collect();
    WeightVector::from_raw(raw)
}

/// Intensity-weighted centroid of cluster `k`; `None` when the cluster is
/// empty, carries no intensity, or `k` is out of range.
pub fn attractor(a: &ClusterAssignment, k: usize) -> Option<Vec2> {
    let pixels = a.clusters.get(k)?;
    let mut total = 0.0;
    let mut acc = Vec2::ZERO;
    for px in pixels {
        total += px.intensity;
        acc += px.position() * px.intensity;
    }
    (total > 0.0).then(|| acc * (1.0 / total))
}

/// Categorical draw proportional to the weights. An empty vector has no
/// concept to draw and returns 0.
pub fn sample_concept<R: Rng + ?Sized>(w: &WeightVector, rng: &mut R) -> usize {
    match WeightedIndex::new(w.weights()) {
        Ok(dist) => dist.sample(rng),
        Err(_) => 0,
    }
}

#[cfg(test)]
mod tests;
