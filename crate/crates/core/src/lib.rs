//! Samplers, spectral solver and Monte-Carlo evaluators for the
//! infinite-length one-dimensional Edwards polymer measure.

pub mod error;
pub mod experiments;
pub mod kernels;
pub mod localtime;
pub mod quad;
pub mod rng;
pub mod samplers;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use stats::McEstimate;
