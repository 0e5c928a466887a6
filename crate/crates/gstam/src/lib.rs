//! Group-sparsity-constrained temporal attention for multi-branch attribute
//! classification over frame sequences.
//!
//! The crate trains per-attribute classification branches on top of shared
//! per-frame features. Each branch carries its own temporal attention module
//! (sigmoid-based STAM or softmax-based PTAM) that weights the frames of a
//! segment before a linear head classifies the aggregated feature. Attention
//! weights of related attributes are tied together by a group-sparsity
//! penalty, so that frames in which a body part is occluded are down-weighted
//! for every attribute reading that part.
//!
//! Modules:
//! - [`tensor`], [`graph`], [`gradcheck`]: dense f64 tensors, a reverse-mode
//!   tape, and finite-difference verification.
//! - [`attention`]: STAM / PTAM temporal attention and feature aggregation.
//! - [`model`]: multi-branch model (attention + linear heads) and checkpoints.
//! - [`losses`]: balanced cross-entropy, plain and grouped sparsity penalties,
//!   attribute group registries.
//! - [`synth`]: synthetic occlusion benchmark generator and dataset files.
//! - [`train`]: Adam, the learning-rate schedule, segment sampling, training,
//!   and segment-averaged trajectory inference.
//! - [`metrics`]: accuracy / macro-F1 reports over all, occluded, or visible
//!   subsets.
//! - [`config`], [`cli`]: flat key-value configs and the command drivers used
//!   by the `gstam` binary.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod attention;
pub mod cli;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
