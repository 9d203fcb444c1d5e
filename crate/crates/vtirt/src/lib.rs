//! Training, evaluation, simulation and file formats for variational temporal IRT.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
