//! Handcrafted feature extraction and linear-classifier benchmarking for
//! retinal OCT scans.
//!
//! The pipeline runs in stages that communicate through files:
//!
//! 1. [`dataset`]: describe a corpus as a CSV manifest and resample its splits.
//! 2. [`imaging`]: load scans and bring them to a 224x224 canvas.
//! 3. [`hog`] / [`lbp`]: extract descriptors; [`store`] persists them (and is
//!    where externally computed CNN embeddings are ingested).
//! 4. [`classifier`]: softmax regression trained with Adam.
//! 5. [`metrics`]: confusion matrices and per-class reports.
//!
//! [`pipeline`] wires the stages together; the `octfeat` binary is a thin
//! command-line wrapper around it.

pub mod classifier;
pub mod dataset;
pub mod features;
pub mod hog;
pub mod imaging;
pub mod lbp;
pub mod metrics;
pub mod pipeline;
pub mod store;

use thiserror::Error;

pub use features::{Extractor, FeatureVector, Method};
pub use imaging::{CanonicalImage, GrayImage};

/// Image/parameter combinations an extractor cannot handle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("image {width}x{height} is not divisible into {unit}x{unit} tiles")]
    NotDivisible { width: usize, height: usize, unit: usize },
    #[error("image {width}x{height} is smaller than one block")]
    TooSmall { width: usize, height: usize },
    #[error("pixel ({x}, {y}) is outside the image")]
    OutOfBounds { x: usize, y: usize },
    #[error("invalid extractor parameters: {0}")]
    InvalidParams(String),
}
