//! Toolkit for turning image-text retrieval benchmarks into fine-grained ones.
//!
//! * [`dataset`]: manifest, caption, embedding and score-matrix formats.
//! * [`similarity`]: exact cosine scoring and deterministic top-k.
//! * [`pool`]: similar-image set search and pool assembly.
//! * [`text`]: coarse caption detection and renovation.
//! * [`eval`]: Recall@K and the evaluation protocols.
//! * [`synth`]: seeded fixtures and mock embedders.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod pool;
pub mod similarity;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
