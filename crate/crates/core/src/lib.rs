//! Dense neural patterns over convolutional stacks: exact receptive-field
//! geometry, whole-image dense feature extraction by network-convolution,
//! regionlet-pooled 1-D features, and a boosting-cascade object detector,
//! with a synthetic-data harness for end-to-end evaluation at desk scale.
//!
//! Layer map:
//!
//! - [`geometry`] — stride/center/receptive-field arithmetic for any
//!   conv/pool stack, plus the netspec text format.
//! - [`tensor`], [`cnn`] — deterministic forward-pass engine and the binary
//!   weight format.
//! - [`image`], [`grid`] — PGM/PPM images and the feature-grid container
//!   with its binary format.
//! - [`dense`] — crop tiling and network-convolution; [`hog`] — the classic
//!   feature family on the same grid shape.
//! - [`regionlets`] — pooling a grid into the 1-D features boosting consumes.
//! - [`detector`] — gentle-boosting cascade training, scoring, NMS,
//!   sliding-window proposals.
//! - [`eval`], [`synth`] — average precision and the synthetic dataset.
//! - [`bench`], [`visualize`] — model-convolution accounting and
//!   feature-importance visualization.
//! - [`pipeline`] — manifest-level train/detect orchestration.

pub mod bench;
pub mod cnn;
pub mod dense;
pub mod detector;
pub mod eval;
pub mod geometry;
pub mod grid;
pub mod hog;
pub mod image;
pub mod pipeline;
pub mod regionlets;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod visualize;
