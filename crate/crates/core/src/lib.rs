//! Recovery of time-varying skew-symmetric low-rank comparison matrices from
//! sparse noisy entry samples.

pub mod bounds;
pub mod error;
pub mod gamesim;
pub mod harness;
pub mod io;
mod linalg;
pub mod model;
pub mod randkit;
pub mod sampling;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
