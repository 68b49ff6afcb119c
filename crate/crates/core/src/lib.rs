//! Oriented-anchor grasp detection machinery without the standard library.
//!
//! Everything here is a pure function of its inputs: rotated-rectangle
//! geometry, the oriented anchor grid and its offset codec, Angle and
//! Jaccard matching, detection losses with a trainable 3×3 reference head,
//! Cornell-style sample processing, the rectangle metric, and the
//! detection-to-grasp planning pipeline. IO, timing and the command line
//! live in the `graspkit` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod math;

pub mod anchor;
pub mod data;
pub mod eval;
pub mod geom;
pub mod loss;
pub mod matching;
pub mod pipeline;

pub use anchor::{AnchorBox, AnchorGrid, GridError, OffsetVector};
pub use eval::{EvalConfig, GraspCandidate};
pub use geom::{GeomError, Point, Polygon, RotatedRect};
pub use loss::{DetectionTensor, LossConfig, ReferenceHead};
pub use matching::{MatchAssignment, MatchedPair};
