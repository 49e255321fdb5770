//! Explanation-guided semantic fuzzing for small neural networks.
//!
//! The crate is `no_std` (with `alloc`) and carries every algorithmic piece:
//! a fixed-layer autodiff engine ([`nn`]), saliency explainers ([`xai`]), the
//! Bézier digit model ([`digit`]), heatmap-to-control-point weighting
//! ([`focus`]), the digit mutation operator ([`mutate`]), the lane-keeping
//! road model and simulator ([`road`]), the campaign loop ([`fuzzer`]) and the
//! evaluation statistics ([`metrics`]). File formats, wall clocks and the CLI
//! live in the `xaifuzz` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod digit;
pub mod focus;
pub mod fuzzer;
pub mod geom;
pub mod metrics;
pub mod mutate;
pub mod nn;
pub mod road;
pub mod rng;
pub mod tensor;
pub mod xai;

pub use tensor::{Tensor, TensorError};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
