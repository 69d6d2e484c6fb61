//! Personalized human activity recognition.
//!
//! Training subjects are weighted (boosting) or selected (convnet) by their
//! similarity to the test subject, where similarity is an exponential kernel
//! over the Euclidean distance between subject descriptors: physical
//! attributes, signal statistics, or both.

pub mod adaboost;
pub mod convnet;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod features;
pub mod report;
pub mod similarity;
pub mod synth;

pub use error::{HarError, Result};
