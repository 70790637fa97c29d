//! Stationary-velocity-field exponentiation by scaling and squaring.
//!
//! The velocity is scaled by 2^-steps, added to the identity, and the
//! resulting near-identity map is composed with itself `steps` times. For
//! moderate velocities the output is diffeomorphic (strictly positive
//! Jacobian determinant). Boundary voxels compose through clamped sampling,
//! which is where the method's boundary error lives.

use crate::error::{Error, Result};
use crate::fields::{FieldKind, VectorField};
use crate::fields::sample_raw_components;
use crate::par;

/// Squaring-step count used when callers don't pick one.
pub const DEFAULT_STEPS: usize = 7;

const MAX_STEPS: usize = 12;

/// Flow of the stationary velocity `z` for unit time.
pub fn exponentiate(z: &VectorField, steps: usize) -> Result<VectorField> {
    z.ensure_kind(FieldKind::Velocity)?;
    if steps == 0 || steps > MAX_STEPS {
        return Err(Error::InvalidArgument(format!(
            "squaring steps must be in 1..={MAX_STEPS}, got {steps}"
        )));
    }
    if !z.all_finite() {
        return Err(Error::NonFinite("velocity field"));
    }
    let grid = *z.grid();
    let n = grid.len();
    let scale = 1.0 / (1u64 << steps) as f64;

    let mut u = vec![[0.0; 3]; n];
    par::fill_indexed(&mut u, |i| {
        let v = z.raw_at(i);
        [v[0] * scale, v[1] * scale, v[2] * scale]
    });
    let mut current = VectorField::from_raw(grid, FieldKind::Transformation, u)?;

    for _ in 0..steps {
        let mut next = vec![[0.0; 3]; n];
        par::fill_indexed(&mut next, |idx| {
            let (i, j, k) = grid.coords(idx);
            let ua = current.raw_at(idx);
            let q = [ua[0] + i as f64, ua[1] + j as f64, ua[2] + k as f64];
            let ub = sample_raw_components(&current, q);
            [ua[0] + ub[0], ua[1] + ub[1], ua[2] + ub[2]]
        });
        current = VectorField::from_raw(grid, FieldKind::Transformation, next)?;
    }
    Ok(current)
}

/// Flow of `-z`: the inverse transformation of [`exponentiate`] up to
/// discretization error.
pub fn exponentiate_inverse(z: &VectorField, steps: usize) -> Result<VectorField> {
    z.ensure_kind(FieldKind::Velocity)?;
    exponentiate(&z.negated(), steps)
}
