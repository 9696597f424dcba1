//! Closed sets with exact, possibly multi-valued projectors and reflectors.
//!
//! Projections return every nearest point. A finite answer is sorted
//! lexicographically, so the first entry is a deterministic selection.
//! When the nearest points form a continuum (the center of a sphere, say)
//! the whole nearest set is returned as a [`SetDescriptor`].

mod set;
mod vector;

pub use set::{distance, project, reflect, PointSet, Projection, SetDescriptor};
pub use vector::Vector;
pub(crate) use vector::sort_dedup;
