//! Dual-branch 3D referring grounding at desk scale.
//!
//! Given a colored point cloud, a superpoint partition, and a short symbolic
//! referring expression, the model grounds the referred object twice: as an
//! axis-aligned bounding box (comprehension branch) and as a point mask
//! (segmentation branch). Superpoint features are built by relative-offset
//! aggregation over ball-query neighborhoods, the two branch outputs are
//! aligned by quality-weighted focal/dice losses, and a learned confidence
//! fuses the two superpoint masks into the final prediction.
//!
//! Everything is plain `f64` with hand-written backward passes; the
//! [`numeric::grad_check`] harness verifies every module (and the full
//! training loss) against central finite differences.
//!
//! Start with the `examples/` directory: each example exercises one
//! capability end to end, from scene generation to training and ablations.

pub mod error;
pub mod geometry;
pub mod numeric;

pub use error::{Error, Result};
