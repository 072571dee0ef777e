//! Graph neural network node classification with a learned edge sparsifier
//! and a conformal-prediction-aware training loss, plus split conformal
//! calibration and the experiment harness around it.

pub mod autodiff;
pub mod conformal;
pub mod error;
pub mod graph;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod sparsify;
pub mod train;

pub use error::{Error, Result};
