//! Spiking actor / deep critic reinforcement learning for mapless robot
//! navigation, with an 8-bit fixed-point deployment path.

pub mod baselines;
pub mod bench;
pub mod critic;
pub mod error;
pub mod eval;
pub mod lif;
pub mod model_io;
pub mod nn;
pub mod quantize;
pub mod sim;
pub mod stbp;
pub mod train;

pub use error::{Error, Result};
