//! Point cloud completion by carving a block of candidate points with
//! learned per-cell convolution kernels.

pub mod carve;
pub mod chamfer;
pub mod cli;
pub mod cloud;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod grid;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod refine;
pub mod sensor;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
