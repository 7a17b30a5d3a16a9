//! Hierarchical attention networks for unreliable-news classification.
//!
//! Word-, sentence- and article-level attention encoders built on a small
//! dense tensor core, with hand-derived backward passes, a training loop,
//! a TF-IDF baseline, evaluation metrics and attention heatmaps.

pub mod baselines;
pub mod data;
pub mod encoders;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod tensor;
pub mod training;
pub mod viz;

pub use error::{HanError, Result};
pub use tensor::{RngState, Tensor};

#[cfg(test)]
pub(crate) mod testutil;
