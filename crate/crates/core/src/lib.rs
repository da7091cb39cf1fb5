pub mod analytic;
pub mod cli;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod karlin_process;
pub mod limit_measures;
pub mod poisson_karlin;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use rng::RngStream;
