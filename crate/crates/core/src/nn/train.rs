use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{argmax, Head, Network, NnError, Result};
use crate::rng::StreamRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Class(usize),
    Value(f32),
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub input: Tensor,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    /// Multiplicative learning-rate decay applied after every epoch.
    pub lr_decay: f32,
    pub seed: u64,
    /// Stop once the held-out metric reaches this value (accuracy for
    /// classifiers, mean absolute error for regressors).
    pub target_metric: Option<f32>,
    /// Random integer translation of image inputs by up to this many pixels.
    pub max_shift: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_decay: 1.0,
            seed: 0,
            target_metric: None,
            max_shift: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_loss: f32,
    /// Accuracy (classifier) or mean absolute error (regressor).
    pub train_metric: f32,
    pub test_metric: f32,
}

/// Mini-batch SGD with momentum. Deterministic for a given `cfg.seed`.
pub fn train(
    mut net: Network,
    train_set: &[Sample],
    test_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(NnError::InvalidConfig("epochs and batch size must be at least 1"));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(NnError::InvalidConfig("learning rate must be positive"));
    }
    let mut rng = crate::rng::stream(cfg.seed, 0);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut velocity = net.zero_grads();
    let mut lr = cfg.learning_rate;
    let mut report = TrainReport {
        epochs_run: 0,
        final_loss: 0.0,
        train_metric: 0.0,
        test_metric: 0.0,
    };
    let n_layers = net.layers.len();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = net.zero_grads();
            for &idx in batch {
                let sample = &train_set[idx];
                let shifted;
                let input = if cfg.max_shift > 0 {
                    shifted = random_shift(&sample.input, cfg.max_shift, &mut rng);
                    &shifted
                } else {
                    &sample.input
                };
                let trace = net
                    .forward_trace(input)
                    .map_err(|_| NnError::Diverged { epoch })?;
                let out = trace.output();
                let (site, seed, loss) = match (net.head, sample.label) {
                    (Head::Classifier { .. }, Label::Class(k)) => {
                        let mut g = out.to_vec();
                        g[k] -= 1.0;
                        (n_layers - 1, g, -libm::logf(out[k].max(1e-12)))
                    }
                    (Head::Regression, Label::Value(t)) => {
                        let d = out[0] - t;
                        (n_layers, vec![d], 0.5 * d * d)
                    }
                    _ => return Err(NnError::InvalidConfig("label kind does not match network head")),
                };
                epoch_loss += loss as f64;
                net.backward(&trace, site, 0, seed, Some(&mut grads));
            }
            let scale = lr / batch.len() as f32;
            for ((p, v), g) in net
                .params
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(grads.iter())
            {
                if let (Some(p), Some(v), Some(g)) = (p, v, g) {
                    sgd_step(p.weight.data_mut(), v.weight.data_mut(), g.weight.data(), cfg.momentum, scale);
                    sgd_step(p.bias.data_mut(), v.bias.data_mut(), g.bias.data(), cfg.momentum, scale);
                }
            }
        }
        let mean_loss = (epoch_loss / train_set.len() as f64) as f32;
        if !mean_loss.is_finite() {
            return Err(NnError::Diverged { epoch });
        }
        lr *= cfg.lr_decay;
        report.epochs_run = epoch + 1;
        report.final_loss = mean_loss;
        if let Some(target) = cfg.target_metric {
            if !test_set.is_empty() {
                let m = metric(&net, test_set)?;
                let reached = match net.head {
                    Head::Classifier { .. } => m >= target,
                    Head::Regression => m <= target,
                };
                if reached {
                    break;
                }
            }
        }
    }
    report.train_metric = metric(&net, train_set)?;
    report.test_metric = if test_set.is_empty() {
        f32::NAN
    } else {
        metric(&net, test_set)?
    };
    Ok((net, report))
}

fn sgd_step(param: &mut [f32], velocity: &mut [f32], grad: &[f32], momentum: f32, scale: f32) {
    for ((p, v), g) in param.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = momentum * *v - scale * g;
        *p += *v;
    }
}

fn metric(net: &Network, set: &[Sample]) -> Result<f32> {
    match net.head {
        Head::Classifier { .. } => accuracy(net, set),
        Head::Regression => mean_absolute_error(net, set),
    }
}

pub fn accuracy(net: &Network, set: &[Sample]) -> Result<f32> {
    let mut correct = 0usize;
    for s in set {
        let out = net.forward(&s.input)?;
        if Label::Class(argmax(out.data()).0) == s.label {
            correct += 1;
        }
    }
    Ok(correct as f32 / set.len().max(1) as f32)
}

pub fn mean_absolute_error(net: &Network, set: &[Sample]) -> Result<f32> {
    let mut total = 0.0f64;
    for s in set {
        let out = net.forward(&s.input)?;
        if let Label::Value(t) = s.label {
            total += (out.data()[0] - t).abs() as f64;
        }
    }
    Ok((total / set.len().max(1) as f64) as f32)
}

fn random_shift(input: &Tensor, max_shift: usize, rng: &mut StreamRng) -> Tensor {
    let shape = input.shape();
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let m = max_shift as i64;
    let dy = rng.random_range(-m..=m);
    let dx = rng.random_range(-m..=m);
    let mut out = Tensor::zeros(shape.to_vec());
    let src = input.data();
    let dst = out.data_mut();
    for ci in 0..c {
        for i in 0..h as i64 {
            let si = i - dy;
            if si < 0 || si >= h as i64 {
                continue;
            }
            for j in 0..w as i64 {
                let sj = j - dx;
                if sj < 0 || sj >= w as i64 {
                    continue;
                }
                dst[ci * h * w + (i as usize) * w + j as usize] =
                    src[ci * h * w + (si as usize) * w + sj as usize];
            }
        }
    }
    out
}
