//! AUTOMAP: learned reconstruction from sensor-domain data to images.

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod container;
pub mod datasets;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod numerics;
pub mod pgm;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
