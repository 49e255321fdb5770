//! Saliency heatmaps: SmoothGrad, Integrated Gradients and Grad-CAM++.
//!
//! Every explainer returns a [`Heatmap`] with the spatial size of the
//! explained input, min-max normalised to `[0, 1]`. The pre-normalisation
//! mean is kept in [`Heatmap::raw_mean`] because intensity comparisons across
//! inputs need the unnormalised scale.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::nn::{Network, NnError, Target};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum XaiMethod {
    SmoothGrad,
    IntegratedGradients,
    GradCamPlusPlus,
}

impl XaiMethod {
    pub const ALL: [XaiMethod; 3] = [
        XaiMethod::SmoothGrad,
        XaiMethod::IntegratedGradients,
        XaiMethod::GradCamPlusPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            XaiMethod::SmoothGrad => "smoothgrad",
            XaiMethod::IntegratedGradients => "ig",
            XaiMethod::GradCamPlusPlus => "gradcampp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XaiConfig {
    pub method: XaiMethod,
    /// Noisy copies averaged by SmoothGrad.
    pub n_samples: usize,
    /// SmoothGrad noise standard deviation as a fraction of the input range.
    pub sigma: f64,
    /// Riemann steps of Integrated Gradients (all-zeros baseline).
    pub ig_steps: usize,
    /// Intensities below this are discarded before concept selection.
    pub epsilon: f64,
}

impl Default for XaiConfig {
    fn default() -> Self {
        Self {
            method: XaiMethod::SmoothGrad,
            n_samples: 25,
            sigma: 0.15,
            ig_steps: 64,
            epsilon: 0.1,
        }
    }
}

impl XaiConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.n_samples == 0 {
            return Err("n_samples must be at least 1");
        }
        if !(self.sigma >= 0.0) {
            return Err("sigma must be non-negative");
        }
        if self.ig_steps == 0 {
            return Err("ig_steps must be at least 1");
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err("epsilon must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Normalised attention map over an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    raw_mean: f64,
    degenerate: bool,
}

impl Heatmap {
    /// Min-max normalises a non-negative raw map. A uniform map normalises to
    /// all zeros and is flagged degenerate.
    pub fn from_raw(height: usize, width: usize, raw: &[f64]) -> Self {
        assert_eq!(raw.len(), height * width, "heatmap dimensions");
        let raw_mean = if raw.is_empty() {
            0.0
        } else {
            raw.iter().sum::<f64>() / raw.len() as f64
        };
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        let (values, degenerate) = if raw.is_empty() || !(span > 0.0) {
            (vec![0.0; raw.len()], true)
        } else {
            (raw.iter().map(|v| (v - min) / span).collect(), false)
        };
        Self {
            height,
            width,
            values,
            raw_mean,
            degenerate,
        }
    }

    /// Wraps values that are already in `[0, 1]`.
    pub fn from_normalized(height: usize, width: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), height * width, "heatmap dimensions");
        let degenerate = values.iter().all(|&v| v == 0.0);
        let raw_mean = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        Self {
            height,
            width,
            values,
            raw_mean,
            degenerate,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Intensity at `(row, col)`.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn raw_mean(&self) -> f64 {
        self.raw_mean
    }

    /// True when the map carries no usable attention (uniform raw map, or
    /// nothing left above the threshold).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Re-applies min-max normalisation to the current values.
    pub fn renormalized(&self) -> Self {
        let mut h = Self::from_raw(self.height, self.width, &self.values);
        h.raw_mean = self.raw_mean;
        h.degenerate |= self.degenerate;
        h
    }

    /// Zeroes every value below `epsilon`.
    pub fn threshold(&self, epsilon: f64) -> Self {
        let values: Vec<f64> = self
            .values
            .iter()
            .map(|&v| if v < epsilon { 0.0 } else { v })
            .collect();
        let degenerate = self.degenerate || values.iter().all(|&v| v == 0.0);
        Self {
            height: self.height,
            width: self.width,
            values,
            raw_mean: self.raw_mean,
            degenerate,
        }
    }

    /// Raw mean intensity and Shannon entropy (bits) of the normalised map
    /// read as a distribution. An all-zero map has entropy 0.
    pub fn stats(&self) -> HeatmapStats {
        let total: f64 = self.values.iter().sum();
        let entropy = if total > 0.0 {
            -self
                .values
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| {
                    let p = v / total;
                    p * libm::log2(p)
                })
                .sum::<f64>()
        } else {
            0.0
        };
        HeatmapStats {
            mean_intensity: self.raw_mean,
            entropy: entropy.max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapStats {
    pub mean_intensity: f64,
    pub entropy: f64,
}

/// Collapses `[channels, h, w]` to `h * w` by summing absolute values.
fn collapse_abs(shape: &[usize], data: &[f64]) -> Vec<f64> {
    let (c, plane) = (shape[0], shape[1] * shape[2]);
    let mut out = vec![0.0; plane];
    for ci in 0..c {
        for (o, v) in out.iter_mut().zip(&data[ci * plane..(ci + 1) * plane]) {
            *o += v.abs();
        }
    }
    out
}

fn spatial(x: &Tensor) -> (usize, usize) {
    let s = x.shape();
    (s[1], s[2])
}

/// Dispatches on `cfg.method`. `rng` is only consumed by SmoothGrad.
pub fn explain<R: Rng + ?Sized>(
    net: &Network,
    x: &Tensor,
    target: Target,
    cfg: &XaiConfig,
    rng: &mut R,
) -> Result<Heatmap, NnError> {
    match cfg.method {
        XaiMethod::SmoothGrad => smoothgrad(net, x, target, cfg, rng),
        XaiMethod::IntegratedGradients => integrated_gradients(net, x, target, cfg).map(|ig| ig.heatmap),
        XaiMethod::GradCamPlusPlus => gradcam_pp(net, x, target).map(|g| g.heatmap),
    }
}

/// Mean absolute input gradient over `n_samples` Gaussian-perturbed copies.
pub fn smoothgrad<R: Rng + ?Sized>(
    net: &Network,
    x: &Tensor,
    target: Target,
    cfg: &XaiConfig,
    rng: &mut R,
) -> Result<Heatmap, NnError> {
    let (h, w) = spatial(x);
    let lo = x.data().iter().copied().fold(f32::INFINITY, f32::min);
    let hi = x.data().iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let range = if hi > lo { (hi - lo) as f64 } else { 1.0 };
    let std = cfg.sigma * range;
    let mut acc = vec![0.0f64; x.len()];
    let mut noisy = x.clone();
    for _ in 0..cfg.n_samples.max(1) {
        if std > 0.0 {
            for (n, &v) in noisy.data_mut().iter_mut().zip(x.data()) {
                let z: f64 = StandardNormal.sample(rng);
                *n = v + (std * z) as f32;
            }
        }
        let g = net.input_gradient(&noisy, target)?;
        for (a, &gv) in acc.iter_mut().zip(g.data()) {
            *a += (gv as f64).abs();
        }
    }
    let n = cfg.n_samples.max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(Heatmap::from_raw(h, w, &collapse_abs(x.shape(), &acc)))
}

#[derive(Debug, Clone)]
pub struct IntegratedGradients {
    pub heatmap: Heatmap,
    /// Signed per-input attributions, before channel collapse.
    pub attributions: Vec<f64>,
    /// Target value at the input and at the baseline.
    pub output: f64,
    pub baseline_output: f64,
}

/// Midpoint Riemann sum of the path integral from the all-zeros baseline to
/// `x`. The heatmap shows attribution magnitudes.
pub fn integrated_gradients(
    net: &Network,
    x: &Tensor,
    target: Target,
    cfg: &XaiConfig,
) -> Result<IntegratedGradients, NnError> {
    let (h, w) = spatial(x);
    let steps = cfg.ig_steps.max(1);
    let mut grad_sum = vec![0.0f64; x.len()];
    let mut point = Tensor::zeros(x.shape().to_vec());
    for s in 0..steps {
        let alpha = (s as f64 + 0.5) / steps as f64;
        for (p, &v) in point.data_mut().iter_mut().zip(x.data()) {
            *p = (alpha * v as f64) as f32;
        }
        let g = net.input_gradient(&point, target)?;
        for (a, &gv) in grad_sum.iter_mut().zip(g.data()) {
            *a += gv as f64;
        }
    }
    let attributions: Vec<f64> = grad_sum
        .iter()
        .zip(x.data())
        .map(|(g, &v)| v as f64 * g / steps as f64)
        .collect();
    let value_at = |t: &Tensor| -> Result<f64, NnError> {
        let trace = net.forward_trace(t)?;
        Ok(net.target_value(&trace, target)? as f64)
    };
    let output = value_at(x)?;
    let baseline_output = value_at(&Tensor::zeros(x.shape().to_vec()))?;
    Ok(IntegratedGradients {
        heatmap: Heatmap::from_raw(h, w, &collapse_abs(x.shape(), &attributions)),
        attributions,
        output,
        baseline_output,
    })
}

#[derive(Debug, Clone)]
pub struct GradCam {
    pub heatmap: Heatmap,
    /// Class-activation map at feature-map resolution, before upsampling.
    pub cam: Vec<f64>,
    /// Per-filter weights.
    pub weights: Vec<f64>,
}

/// Grad-CAM++ on the last convolutional layer, bilinearly upsampled to the
/// input size. A target with zero gradient yields a degenerate zero map.
pub fn gradcam_pp(net: &Network, x: &Tensor, target: Target) -> Result<GradCam, NnError> {
    let layer = net
        .last_conv_layer()
        .ok_or(NnError::NotConvolutional { layer: usize::MAX })?;
    let (acts, grads) = net.layer_activations_and_grads(x, layer, target)?;
    let shape = acts.shape();
    let (k, fh, fw) = (shape[0], shape[1], shape[2]);
    let plane = fh * fw;
    let mut weights = vec![0.0f64; k];
    for (f, weight) in weights.iter_mut().enumerate() {
        let a = &acts.data()[f * plane..(f + 1) * plane];
        let g = &grads.data()[f * plane..(f + 1) * plane];
        let a_sum: f64 = a.iter().map(|&v| v as f64).sum();
        *weight = g
            .iter()
            .map(|&gv| {
                let gv = gv as f64;
                let g2 = gv * gv;
                let denom = 2.0 * g2 + a_sum * g2 * gv;
                let alpha = if denom != 0.0 { g2 / denom } else { 0.0 };
                alpha * gv.max(0.0)
            })
            .sum();
    }
    let mut cam = vec![0.0f64; plane];
    for (f, &wk) in weights.iter().enumerate() {
        for (c, &a) in cam.iter_mut().zip(&acts.data()[f * plane..(f + 1) * plane]) {
            *c += wk * a as f64;
        }
    }
    cam.iter_mut().for_each(|c| *c = c.max(0.0));
    let (h, w) = spatial(x);
    let up = bilinear_resize(&cam, fh, fw, h, w);
    Ok(GradCam {
        heatmap: Heatmap::from_raw(h, w, &up),
        cam,
        weights,
    })
}

/// Bilinear resize with half-pixel centres and edge clamping; the identity
/// when sizes match.
pub fn bilinear_resize(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    if sh == dh && sw == dw {
        return src.to_vec();
    }
    let axis = |d: usize, s_len: usize, d_len: usize| -> (usize, usize, f64) {
        let pos = ((d as f64 + 0.5) * s_len as f64 / d_len as f64 - 0.5).clamp(0.0, (s_len - 1) as f64);
        let i0 = pos as usize;
        let i1 = (i0 + 1).min(s_len - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut out = vec![0.0; dh * dw];
    for r in 0..dh {
        let (r0, r1, fr) = axis(r, sh, dh);
        for c in 0..dw {
            let (c0, c1, fc) = axis(c, sw, dw);
            let top = src[r0 * sw + c0] * (1.0 - fc) + src[r0 * sw + c1] * fc;
            let bottom = src[r1 * sw + c0] * (1.0 - fc) + src[r1 * sw + c1] * fc;
            out[r * dw + c] = top * (1.0 - fr) + bottom * fr;
        }
    }
    out
}

#[cfg(test)]
mod tests;
