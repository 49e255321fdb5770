//! Fixed-layer neural networks with reverse-mode gradients.
//!
//! A [`Network`] is a straight chain of [`Layer`]s over single-sample
//! activations laid out as `[channels, height, width]` (or flat vectors after
//! the first dense layer). [`Network::forward_trace`] records every
//! intermediate activation so that gradients can be taken with respect to the
//! input, any intermediate activation, or the parameters.

mod arch;
mod ops;
mod train;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::tensor::{Tensor, TensorError};

pub use arch::{digit_classifier, driver_regressor, DIGIT_CLASSES, DIGIT_SIDE, FRAME_SIDE};
pub use train::{accuracy, mean_absolute_error, train, Label, Sample, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("layer {layer} is not a convolution")]
    NotConvolutional { layer: usize },
    #[error("target {0:?} is not valid for this network")]
    InvalidTarget(Target),
    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T, E = NnError> = core::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    /// Valid (unpadded) 2D convolution.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    /// Non-overlapping max pooling; trailing rows/columns are dropped.
    MaxPool { size: usize },
    /// Fully connected layer; flattens its input.
    Dense { inputs: usize, outputs: usize },
    Tanh,
    Softmax,
}

impl Layer {
    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            )),
            Layer::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            _ => None,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            Layer::Conv2d {
                in_channels, kernel, ..
            } => in_channels * kernel * kernel,
            Layer::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    /// Softmax over `classes` outputs.
    Classifier { classes: usize },
    /// Single `tanh` output in `[-1, 1]`.
    Regression,
}

/// What a gradient is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    /// Component of the network output (softmax probability or the scalar
    /// regression value).
    Output(usize),
    /// Pre-softmax class score. Only valid for classifiers.
    Logit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Chain of layers with their parameters. Immutable once trained; every
/// inference method takes `&self`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    params: Vec<Option<Param>>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the
    /// output shape.
    shapes: Vec<Vec<usize>>,
    head: Head,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `acts[i]` is the input of layer `i`; `acts[layers]` is the output.
    acts: Vec<Vec<f32>>,
    /// Flat argmax indices for max-pool layers.
    pool_argmax: Vec<Vec<u32>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f32] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn activation(&self, index: usize) -> &[f32] {
        &self.acts[index]
    }
}

impl Network {
    /// Builds a network with all parameters set to zero.
    pub fn zeroed(input_shape: [usize; 3], layers: Vec<Layer>, head: Head) -> Result<Self> {
        let shapes = infer_shapes(&input_shape, &layers)?;
        let out = shapes.last().expect("non-empty");
        match head {
            Head::Classifier { classes } => {
                if layers.last() != Some(&Layer::Softmax) || out.as_slice() != [classes] {
                    return Err(NnError::InvalidArchitecture(
                        "classifier must end in a softmax over its classes".into(),
                    ));
                }
            }
            Head::Regression => {
                if layers.last() != Some(&Layer::Tanh) || out.as_slice() != [1] {
                    return Err(NnError::InvalidArchitecture(
                        "regressor must end in a single tanh output".into(),
                    ));
                }
            }
        }
        let params = layers
            .iter()
            .map(|l| {
                l.param_shapes().map(|(w, b)| Param {
                    weight: Tensor::zeros(w),
                    bias: Tensor::zeros(b),
                })
            })
            .collect();
        Ok(Self {
            layers,
            params,
            shapes,
            head,
        })
    }

    /// Builds a network with uniform fan-in scaled weights,
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, and zero biases.
    pub fn initialized<R: Rng + ?Sized>(
        input_shape: [usize; 3],
        layers: Vec<Layer>,
        head: Head,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeroed(input_shape, layers, head)?;
        for (layer, param) in net.layers.iter().zip(net.params.iter_mut()) {
            if let Some(p) = param {
                let bound = libm::sqrtf(6.0 / layer.fan_in() as f32);
                for w in p.weight.data_mut() {
                    *w = rng.random_range(-bound..bound);
                }
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().map(|s| s.iter().product()).unwrap_or(0)
    }

    /// Shape of the activation produced by layer `index`.
    pub fn layer_output_shape(&self, index: usize) -> &[usize] {
        &self.shapes[index + 1]
    }

    pub fn params(&self) -> &[Option<Param>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut().flatten()
    }

    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.weight.len() + p.bias.len())
            .sum()
    }

    /// Replaces the parameters of every parameterised layer, in order.
    pub fn set_params(&mut self, params: Vec<Param>) -> Result<()> {
        let slots: Vec<usize> = (0..self.layers.len())
            .filter(|&i| self.params[i].is_some())
            .collect();
        if slots.len() != params.len() {
            return Err(NnError::InvalidArchitecture(alloc::format!(
                "expected {} parameter blocks, got {}",
                slots.len(),
                params.len()
            )));
        }
        for (slot, p) in slots.iter().zip(params.iter()) {
            let (w, b) = self.layers[*slot].param_shapes().expect("param layer");
            p.weight.expect_shape(&w)?;
            p.bias.expect_shape(&b)?;
        }
        for (slot, p) in slots.into_iter().zip(params) {
            self.params[slot] = Some(p);
        }
        Ok(())
    }

    /// Index of the last convolutional layer.
    pub fn last_conv_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| matches!(l, Layer::Conv2d { .. }))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let trace = self.forward_trace(x)?;
        let shape = self.shapes.last().expect("non-empty").clone();
        let mut acts = trace.acts;
        Ok(Tensor::new(shape, acts.pop().expect("output"))?)
    }

    pub fn forward_trace(&self, x: &Tensor) -> Result<ForwardTrace> {
        x.expect_shape(&self.shapes[0])?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pool_argmax = vec![Vec::new(); self.layers.len()];
        acts.push(x.data().to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = &acts[i];
            let in_shape = &self.shapes[i];
            let out_len: usize = self.shapes[i + 1].iter().product();
            let mut out = vec![0.0f32; out_len];
            match *layer {
                Layer::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    ..
                } => {
                    let p = self.params[i].as_ref().expect("conv params");
                    ops::conv_forward(
                        input,
                        in_shape,
                        p.weight.data(),
                        p.bias.data(),
                        out_channels,
                        kernel,
                        stride,
                        &self.shapes[i + 1],
                        &mut out,
                    );
                }
                Layer::Relu => {
                    for (o, &v) in out.iter_mut().zip(input) {
                        *o = v.max(0.0);
                    }
                }
                Layer::Tanh => {
                    for (o, &v) in out.iter_mut().zip(input) {
                        *o = libm::tanhf(v);
                    }
                }
                Layer::MaxPool { size } => {
                    pool_argmax[i] =
                        ops::maxpool_forward(input, in_shape, size, &self.shapes[i + 1], &mut out);
                }
                Layer::Dense { inputs, outputs } => {
                    let p = self.params[i].as_ref().expect("dense params");
                    ops::dense_forward(input, p.weight.data(), p.bias.data(), inputs, outputs, &mut out);
                }
                Layer::Softmax => ops::softmax(input, &mut out),
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite { layer: i });
            }
            acts.push(out);
        }
        Ok(ForwardTrace { acts, pool_argmax })
    }

    /// Resolves a target to (activation index, component).
    fn target_site(&self, target: Target) -> Result<(usize, usize)> {
        let n = self.layers.len();
        match target {
            Target::Output(k) if k < self.output_len() => Ok((n, k)),
            Target::Logit(k)
                if matches!(self.head, Head::Classifier { classes } if k < classes) =>
            {
                Ok((n - 1, k))
            }
            _ => Err(NnError::InvalidTarget(target)),
        }
    }

    /// Value of the target quantity in a recorded trace.
    pub fn target_value(&self, trace: &ForwardTrace, target: Target) -> Result<f32> {
        let (site, k) = self.target_site(target)?;
        Ok(trace.acts[site][k])
    }

    /// Propagates `grad` (w.r.t. `acts[from]`) down to `acts[to]`.
    /// Parameter gradients are accumulated into `param_grads` when given.
    fn backward(
        &self,
        trace: &ForwardTrace,
        from: usize,
        to: usize,
        mut grad: Vec<f32>,
        mut param_grads: Option<&mut [Option<Param>]>,
    ) -> Vec<f32> {
        for i in (to..from).rev() {
            let input = &trace.acts[i];
            let output = &trace.acts[i + 1];
            let in_shape = &self.shapes[i];
            // Training never needs the gradient w.r.t. the network input.
            let need_input_grad = !(i == 0 && param_grads.is_some());
            let mut dx = vec![0.0f32; input.len()];
            match self.layers[i] {
                Layer::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    ..
                } => {
                    let p = self.params[i].as_ref().expect("conv params");
                    let pg = param_grads.as_deref_mut().and_then(|g| g[i].as_mut());
                    ops::conv_backward(
                        input,
                        in_shape,
                        p.weight.data(),
                        out_channels,
                        kernel,
                        stride,
                        &self.shapes[i + 1],
                        &grad,
                        need_input_grad.then_some(dx.as_mut_slice()),
                        pg.map(|g| (g.weight.data_mut(), g.bias.data_mut())),
                    );
                }
                Layer::Relu => {
                    for ((d, &g), &x) in dx.iter_mut().zip(&grad).zip(input) {
                        *d = if x > 0.0 { g } else { 0.0 };
                    }
                }
                Layer::Tanh => {
                    for ((d, &g), &y) in dx.iter_mut().zip(&grad).zip(output) {
                        *d = g * (1.0 - y * y);
                    }
                }
                Layer::MaxPool { .. } => {
                    for (&g, &idx) in grad.iter().zip(&trace.pool_argmax[i]) {
                        dx[idx as usize] += g;
                    }
                }
                Layer::Dense { inputs, outputs } => {
                    let p = self.params[i].as_ref().expect("dense params");
                    let pg = param_grads.as_deref_mut().and_then(|g| g[i].as_mut());
                    ops::dense_backward(
                        input,
                        p.weight.data(),
                        inputs,
                        outputs,
                        &grad,
                        &mut dx,
                        pg.map(|g| (g.weight.data_mut(), g.bias.data_mut())),
                    );
                }
                Layer::Softmax => {
                    let dot: f32 = grad.iter().zip(output).map(|(g, y)| g * y).sum();
                    for ((d, &g), &y) in dx.iter_mut().zip(&grad).zip(output) {
                        *d = y * (g - dot);
                    }
                }
            }
            grad = dx;
        }
        grad
    }

    /// Gradient of the target w.r.t. the input, together with the target's value.
    pub fn input_gradient_with_value(&self, x: &Tensor, target: Target) -> Result<(f32, Tensor)> {
        let (site, k) = self.target_site(target)?;
        let trace = self.forward_trace(x)?;
        let mut seed = vec![0.0f32; trace.acts[site].len()];
        seed[k] = 1.0;
        let value = trace.acts[site][k];
        let g = self.backward(&trace, site, 0, seed, None);
        Ok((value, Tensor::new(self.shapes[0].clone(), g)?))
    }

    /// `d target / d x`, same shape as `x`.
    pub fn input_gradient(&self, x: &Tensor, target: Target) -> Result<Tensor> {
        self.input_gradient_with_value(x, target).map(|(_, g)| g)
    }

    /// Feature maps of convolution `layer` (after its ReLU when one follows
    /// directly) and the gradient of `target` with respect to them.
    pub fn layer_activations_and_grads(
        &self,
        x: &Tensor,
        layer: usize,
        target: Target,
    ) -> Result<(Tensor, Tensor)> {
        if !matches!(self.layers.get(layer), Some(Layer::Conv2d { .. })) {
            return Err(NnError::NotConvolutional { layer });
        }
        let (site, k) = self.target_site(target)?;
        let act_index = if self.layers.get(layer + 1) == Some(&Layer::Relu) {
            layer + 2
        } else {
            layer + 1
        };
        let trace = self.forward_trace(x)?;
        let mut seed = vec![0.0f32; trace.acts[site].len()];
        seed[k] = 1.0;
        let g = self.backward(&trace, site, act_index, seed, None);
        let shape = self.shapes[act_index].clone();
        Ok((
            Tensor::new(shape.clone(), trace.acts[act_index].clone())?,
            Tensor::new(shape, g)?,
        ))
    }

    /// Activations feeding the final dense layer (the embedding used for
    /// manifold metrics).
    pub fn penultimate(&self, x: &Tensor) -> Result<Vec<f32>> {
        let last_dense = self
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Dense { .. }))
            .ok_or_else(|| NnError::InvalidArchitecture("no dense layer".into()))?;
        let mut trace = self.forward_trace(x)?;
        Ok(core::mem::take(&mut trace.acts[last_dense]))
    }

    /// Arg-max class (lowest index on ties) and its probability.
    pub fn classify(&self, x: &Tensor) -> Result<(usize, f32)> {
        let out = self.forward(x)?;
        Ok(argmax(out.data()))
    }

    fn zero_grads(&self) -> Vec<Option<Param>> {
        self.params
            .iter()
            .map(|p| {
                p.as_ref().map(|p| Param {
                    weight: Tensor::zeros(p.weight.shape().to_vec()),
                    bias: Tensor::zeros(p.bias.shape().to_vec()),
                })
            })
            .collect()
    }
}

/// Index of the largest value (first one on ties) and the value itself.
pub fn argmax(values: &[f32]) -> (usize, f32) {
    let mut best = (0, f32::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn infer_shapes(input: &[usize; 3], layers: &[Layer]) -> Result<Vec<Vec<usize>>> {
    let bad = |i: usize, msg: &str| NnError::InvalidArchitecture(alloc::format!("layer {i}: {msg}"));
    let mut shapes = vec![input.to_vec()];
    for (i, layer) in layers.iter().enumerate() {
        let cur = shapes.last().expect("non-empty").clone();
        let len: usize = cur.iter().product();
        let next = match *layer {
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                if cur.len() != 3 || cur[0] != in_channels {
                    return Err(bad(i, "convolution input channel mismatch"));
                }
                if kernel == 0 || stride == 0 || cur[1] < kernel || cur[2] < kernel {
                    return Err(bad(i, "kernel does not fit the input"));
                }
                vec![
                    out_channels,
                    (cur[1] - kernel) / stride + 1,
                    (cur[2] - kernel) / stride + 1,
                ]
            }
            Layer::MaxPool { size } => {
                if cur.len() != 3 || size == 0 || cur[1] < size || cur[2] < size {
                    return Err(bad(i, "pool does not fit the input"));
                }
                vec![cur[0], cur[1] / size, cur[2] / size]
            }
            Layer::Dense { inputs, outputs } => {
                if len != inputs {
                    return Err(bad(i, "dense input size mismatch"));
                }
                vec![outputs]
            }
            Layer::Softmax => {
                if cur.len() != 1 {
                    return Err(bad(i, "softmax needs a flat input"));
                }
                cur
            }
            Layer::Relu | Layer::Tanh => cur,
        };
        shapes.push(next);
    }
    Ok(shapes)
}
