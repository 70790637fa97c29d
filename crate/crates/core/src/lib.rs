//! 3-D deformation-field toolkit.
//!
//! Provides the differential-geometric core for diffeomorphic volume
//! processing: Jacobian-determinant and curl extraction from deformation
//! fields, variational reconstruction of a transformation from prescribed
//! determinant/curl targets, stationary-velocity exponentiation, SSD
//! registration, transformation averaging, iterative template construction,
//! multi-channel feature export, NIfTI-1 I/O, and evaluation metrics.
//!
//! All voxel loops are data-parallel when the `parallel` feature (default)
//! is enabled; reductions are chunked deterministically, so results are
//! bit-identical across thread counts and the sequential fallback.

pub mod average;
pub mod atlas;
pub mod diffgeo;
pub mod error;
pub mod features;
pub mod fields;
pub mod metrics;
pub mod nifti;
pub mod register;
pub mod svf;
pub mod synth;
pub mod varsolve;

mod par;
mod smooth;
mod stencil;

pub use error::{Error, Result};

/// Size the global worker pool (0 means all cores). Call once, before the
/// first parallel operation. Without the `parallel` feature this is a no-op:
/// everything runs sequentially and produces the same bits.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool setup failed: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) -> Result<()> {
    Ok(())
}
