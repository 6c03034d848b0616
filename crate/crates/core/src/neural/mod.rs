//! A deliberately small reverse-mode engine: just the layers the actor
//! networks need (same-padded conv2d, dense, ReLU, clamped Gaussian heads)
//! plus Adam. All arithmetic is `f64`.

mod adam;
pub mod checkpoint;
mod layers;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use layers::{init_gaussian, AdamMoments, LayerGrad, LayerKind, LayerParams};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

/// `½·log(2π)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Bounds applied to every log-std head output before use.
pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 4.0;
