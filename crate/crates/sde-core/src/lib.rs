//! Continuous speaker-distance estimation from single-channel reverberant
//! audio: room-acoustics simulation, dataset synthesis, time-frequency
//! features, an attention-CRNN regressor, training, and evaluation.

pub mod audio;
pub mod container;
pub mod error;
pub mod features;
pub mod model;
pub mod rng;
pub mod evaluation;
pub mod roomsim;
pub mod scenegen;
pub mod training;

pub use error::{Error, Result};
