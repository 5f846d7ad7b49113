//! Minority-class intrusion detection.
//!
//! The crate filters imbalanced attack classes out of a labelled traffic
//! dataset, pretrains a WGAN-GP on normal traffic, fine-tunes one copy per
//! minority class to synthesize extra samples, and classifies the augmented
//! data with a histogram gradient-boosted tree ensemble.

pub mod archive;
pub mod autodiff;
pub mod boruta;
pub mod data;
pub mod error;
pub mod filter;
pub mod gan;
pub mod gbdt;
pub mod metrics;
pub mod par;
pub mod pipeline;

pub use error::{Error, Result};
