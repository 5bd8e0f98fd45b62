//! Low-latency spiking neural networks trained with crafted input noise.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole numeric
//! pipeline: dense tensor kernels, leaky integrate-and-fire dynamics with
//! surrogate-gradient backpropagation through time, ANN and SNN execution of a
//! layer graph, ANN-to-SNN threshold calibration, FGSM/PGD attacks, the four
//! training regimes (ANN, traditional SNN, period-partitioned noise-crafted
//! SNN, Gaussian-noise SNN) and spiking-activity / FLOP / energy metrics.
//!
//! File formats, dataset ingestion and the command line live in the `hiresnn`
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod attacks;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod spiking;
pub mod tensorops;
pub mod training;

pub use error::{Error, Result};
pub use tensorops::Tensor;
