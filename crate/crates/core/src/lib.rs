//! Toolkit for long-tailed semantic segmentation datasets and models.
//!
//! * [`dataset`]: label rasters, manifests, the per-image class-count index and
//!   a synthetic dataset generator.
//! * [`stats`]: image- and pixel-level class weights, Gini coefficients and the
//!   frequent/common/rare class split.
//! * [`sampler`]: greedy elimination that carves a long-tailed subset out of a
//!   balanced dataset.
//! * [`eval`]: confusion-matrix mIoU, overall and per frequency split.
//! * [`matcher`]: one-to-one Hungarian matching, the frequency-based
//!   one-to-many matcher and semantic mask composition.
//! * [`cli`]: the `ltss` command-line front end.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod matcher;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
