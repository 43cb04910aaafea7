//! Feedforward networks whose hidden units emit one of `L` discrete levels.
//!
//! The discretized units (SUDO, and the rectified R-SUDO) bin the output of
//! `tanh` into `L` levels on the forward pass and backpropagate the plain
//! tanh derivative, a straight-through estimate that lets ordinary SGD and
//! Adam train them unchanged. Around that sit the pieces needed to run the
//! classification, regression, memorization, autoencoding and MNIST sweeps:
//! dataset generators and loaders, a sweep runner with per-cell learning-rate
//! selection, and CSV/netpbm reporting.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the experiment harness uses.

pub mod activations;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod netpbm;
pub mod network;
pub mod optim;
pub mod report;
pub mod scalar;
pub mod training;

pub use activations::{ActivationKind, Levels};
pub use error::{Error, Result};
pub use network::{LayerActivation, LayerSpec, Loss, NetworkSpec};
pub use optim::OptimizerKind;
pub use scalar::Real;
pub use training::{TrainConfig, TrainReport};

pub type Matrix = linalg::Matrix<f64>;
pub type Network = network::Network<f64>;
pub type ForwardTrace = network::ForwardTrace<f64>;
pub type Gradients = network::Gradients<f64>;
pub type Dataset = datasets::Dataset<f64>;
pub type OptimizerState = optim::OptimizerState<f64>;

pub type MatrixF32 = linalg::Matrix<f32>;
pub type NetworkF32 = network::Network<f32>;
