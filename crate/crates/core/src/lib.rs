//! Relaxed Douglas-Rachford iteration for two-set feasibility problems with
//! nonconvex, possibly inconsistent sets.
//!
//! The crate is organised in layers:
//! - [`geometry`]: closed sets in Euclidean space with exact projectors.
//! - [`operators`]: the relaxed Douglas-Rachford map and its product-space lift.
//! - [`fixedpoint`]: iteration, rate fitting and fixed-point certificates.
//! - [`regularity`]: sampled estimators for regularity constants.
//! - [`lab`]: named scenarios, run reports and the command-line front end.

pub mod error;
pub mod fixedpoint;
pub mod geometry;
pub mod lab;
pub mod operators;
pub mod parallel;
pub mod regularity;

pub use error::{Error, Result};
pub use geometry::{PointSet, Projection, SetDescriptor, Vector};
pub use operators::{DifferenceVector, LiftedState, Relaxation, TwoSetProblem};
pub use parallel::Execution;
