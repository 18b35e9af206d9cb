//! Rating-prediction models that learn user embeddings while they fit, and the
//! pair-distance correlation (PDC) measure that scores those embeddings.
//!
//! Four ways of fusing a user embedding with dense item features are provided
//! (additive mask, multiplicative mask, tensor fusion and a factorization
//! machine) next to two non-embedding baselines. Everything here is pure
//! computation over in-memory data and builds without `std`; file formats,
//! MovieLens ingestion and the experiment CLI live in the `embedlab` crate.
//!
//! ```
//! use embedlab_core::models::{param_count, ModelKind};
//!
//! assert_eq!(param_count(ModelKind::AdditiveMask, 4), 8293);
//! assert_eq!(param_count(ModelKind::TensorFusion, 64), 133_737);
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
mod error;
pub mod evaluation;
pub mod models;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};

/// One observed rating with users and items already mapped to dense indices.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

impl Rating {
    pub fn new(user: usize, item: usize, value: f64) -> Self {
        Rating { user, item, value }
    }
}
