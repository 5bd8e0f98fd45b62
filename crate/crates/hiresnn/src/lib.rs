//! Dataset readers, checkpoints, CSV reports and the experiment CLI built on
//! `hiresnn-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod report;

pub use error::{AppError, AppResult};
