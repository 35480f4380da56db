//! A small 3D U-Net engine on the CPU.
//!
//! - [`conv`], [`deconv`], [`pool`], [`ops`]: layers with explicit backward passes
//! - [`loss`]: softmax cross-entropy
//! - [`model`]: the network, built from [`UNetConfig`]
//! - [`train`]: Adam-driven training loop
//! - [`weights`]: `.w3u` persistence

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod conv;
pub mod deconv;
pub mod error;
pub mod loss;
pub mod model;
pub mod ops;
pub mod optim;
pub mod pool;
pub mod scalar;
pub mod store;
pub mod tensor;
pub mod train;
pub mod weights;

pub use config::{LayerKind, LayerSpec, UNetConfig};
pub use error::{Error, Result};
pub use model::{Trace, UNet};
pub use scalar::Scalar;
pub use store::WeightStore;
pub use tensor::Tensor;
pub use train::{train, Sample, TrainOutcome, TrainParams, Trainer};
pub use weights::{load_weights, save_weights};
