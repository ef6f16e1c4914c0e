//! Multi-task speech enhancement: separation, counting and target speaker
//! extraction with one model, plus the simulation, training and evaluation
//! around it.

pub mod audio;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod nn;
pub mod signal;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
