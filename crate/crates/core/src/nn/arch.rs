use alloc::vec;

use rand::Rng;

use super::{Head, Layer, Network, Result};

pub const DIGIT_SIDE: usize = 28;
pub const DIGIT_CLASSES: usize = 10;
pub const FRAME_SIDE: usize = 64;

/// Digit classifier: two convolutions, one max-pool, two dense layers.
pub fn digit_classifier<R: Rng + ?Sized>(rng: &mut R) -> Result<Network> {
    Network::initialized(
        [1, DIGIT_SIDE, DIGIT_SIDE],
        vec![
            Layer::Conv2d { in_channels: 1, out_channels: 6, kernel: 5, stride: 1 },
            Layer::Relu,
            Layer::Conv2d { in_channels: 6, out_channels: 12, kernel: 3, stride: 1 },
            Layer::Relu,
            Layer::MaxPool { size: 2 },
            Layer::Dense { inputs: 12 * 11 * 11, outputs: 48 },
            Layer::Relu,
            Layer::Dense { inputs: 48, outputs: DIGIT_CLASSES },
            Layer::Softmax,
        ],
        Head::Classifier { classes: DIGIT_CLASSES },
        rng,
    )
}

/// Lane-keeping driver: three strided convolutions and two dense layers
/// mapping a top-down frame to a steering command in `[-1, 1]`.
pub fn driver_regressor<R: Rng + ?Sized>(rng: &mut R) -> Result<Network> {
    Network::initialized(
        [1, FRAME_SIDE, FRAME_SIDE],
        vec![
            Layer::Conv2d { in_channels: 1, out_channels: 8, kernel: 5, stride: 2 },
            Layer::Relu,
            Layer::Conv2d { in_channels: 8, out_channels: 12, kernel: 3, stride: 2 },
            Layer::Relu,
            Layer::Conv2d { in_channels: 12, out_channels: 16, kernel: 3, stride: 2 },
            Layer::Relu,
            Layer::Dense { inputs: 16 * 6 * 6, outputs: 32 },
            Layer::Relu,
            Layer::Dense { inputs: 32, outputs: 1 },
            Layer::Tanh,
        ],
        Head::Regression,
        rng,
    )
}
