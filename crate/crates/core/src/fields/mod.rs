//! Core lattice types: grids, scalar volumes, vector fields, interpolation,
//! warping and composition. Everything downstream builds on these.

mod field;
mod grid;
mod volume;
mod warp;

pub use field::{FieldKind, VectorField};
pub use grid::Grid3;
pub use volume::{ScalarKind, ScalarVolume};
pub use warp::{compose, sample_nearest, sample_trilinear, warp};

pub(crate) use warp::sample_raw_components;
