//! Spectral analysis of correlations for Markov-modelled skew products over
//! Z^d with a circle fiber.

#![allow(clippy::needless_range_loop, clippy::explicit_counter_loop)]

pub mod acceptance;
pub mod correlation;
pub mod error;
pub mod fixtures;
pub mod floquet;
pub mod jet;
pub mod linalg;
pub mod model;
pub mod observable;
pub mod resonance;
pub mod stationary_phase;
pub mod twisted;
pub mod ulam;

pub use error::{CoverError, Result};
pub use model::{build_model, MarkovModel, ModelConfig};
pub use observable::CoverObservable;
