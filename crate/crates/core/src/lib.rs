pub mod aae;
pub mod checkpoint;
pub mod cli;
pub mod detector;
pub mod error;
pub mod eval;
pub mod data;
pub mod generator;
pub mod matrix;
pub mod model;
pub mod nn;
pub mod rng;
pub mod trainer;

pub use error::{CheckpointError, Error, Result};
pub use matrix::Matrix;
pub use model::{Architecture, Da3dModel, Preset};
pub use rng::SeededRng;
