//! Delay-robust decentralized trajectory deconfliction.
//!
//! The crate bundles a convex trajectory planner, conservative
//! continuous-time collision checks, the per-agent deconfliction protocol
//! (robust and baseline modes), a deterministic discrete-event network
//! simulator and an experiment harness.

pub mod geometry;
pub mod harness;
pub mod netsim;
pub mod planner;
pub mod protocol;
pub mod trajectory;

pub use geometry::{BoundaryBox, SeparatingPlane};
pub use trajectory::{DynamicLimits, PolySegment, StateSample, StopCriteria, Trajectory, Vec3};
