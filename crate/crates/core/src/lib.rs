//! Learning and assessment of rehabilitation exercises from skeleton motion.
//!
//! The library models a recorded exercise as a trajectory on a product
//! manifold with one `R^3 x S^3` factor per tracked joint (position +
//! orientation quaternion). Expert demonstrations are time-aligned with
//! dynamic time warping, summarised by a Gaussian mixture over
//! `(time, pose)` whose pose statistics live in tangent spaces of the
//! manifold, and turned into an ideal movement via Gaussian mixture
//! regression. Patient recordings are then scored against that model
//! globally, per body part and per temporal segment, and low-scoring
//! segments can be classified into known error patterns to produce
//! coaching feedback.

pub mod alignment;
pub mod assessment;
pub mod error;
pub mod feedback;
pub mod movement_model;
pub mod pose_manifold;
pub mod skeleton_io;

pub use error::{Error, Result};
