//! Real-time fire and flame detection for video frame sequences.
//!
//! Detection is a three-stage cascade:
//!
//! 1. [`proposal`] finds bright candidate regions with a running-Gaussian
//!    background model and an adaptive multi-level intensity threshold.
//! 2. Each candidate blob is described by dense SURF + local LAB descriptors
//!    ([`features`]), soft-assigned against a k-means vocabulary
//!    ([`codebook`]) and classified by a kernel SVM ([`classifier`]).
//! 3. Blobs labeled fire are tracked and confirmed only if their shape
//!    statistics over 25 frames show flame-like variation ([`temporal`]).
//!
//! [`pipeline`] wires the stages together and provides the training and
//! evaluation workflows. [`synth`] generates synthetic scenes and patches.

pub mod classifier;
pub mod codebook;
pub mod error;
pub mod features;
pub mod imaging;
pub mod pipeline;
pub mod proposal;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
