//! Multi-view 6D object pose estimation for bin-picking scenes.
//!
//! Per-view keypoint heatmaps are fused into a 3D keypoint probability field
//! using known camera transforms; object instances are clustered in world
//! space; poses are retrieved by rigidity-constrained RANSAC over the fused
//! keypoint uncertainties, refined with uncertainty-filtered ICP against the
//! backprojected depth, and scored with a combined confidence that separates
//! correct detections from false positives. A synthetic bin-scene simulator
//! provides ground truth for the whole chain.

pub mod error;
pub mod fusion;
pub mod geometry;
pub mod heatmap;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod refine;
pub mod score;
pub mod shapes;
pub mod simulate;

pub use error::{Error, Result};
