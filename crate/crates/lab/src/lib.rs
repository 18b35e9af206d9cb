//! MovieLens ingestion, dataset cache, model files and the experiment
//! harness around `embedlab-core`.

pub mod cache;
pub mod config;
pub mod dataio;
mod error;
pub mod harness;
pub mod modelio;
pub mod synth;

pub use error::{LabError, Result};
