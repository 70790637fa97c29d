//! Interpolation, warping and transformation composition.
//!
//! Sampling clamps out-of-bounds points to the boundary face value, and
//! points that land exactly on a voxel return the stored value bit-for-bit.

use crate::error::{Error, Result};
use crate::fields::{FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField};
use crate::par;

#[inline]
fn clamp_axis(x: f64, n: usize) -> f64 {
    x.max(0.0).min((n - 1) as f64)
}

/// Base voxel and fractional offsets of a clamped continuous point.
#[inline]
fn cell_of(grid: &Grid3, p: [f64; 3]) -> (usize, usize, usize, f64, f64, f64) {
    let (nx, ny, nz) = grid.dims();
    let x = clamp_axis(p[0], nx);
    let y = clamp_axis(p[1], ny);
    let z = clamp_axis(p[2], nz);
    let x0 = (x.floor() as usize).min(nx - 1);
    let y0 = (y.floor() as usize).min(ny - 1);
    let z0 = (z.floor() as usize).min(nz - 1);
    (x0, y0, z0, x - x0 as f64, y - y0 as f64, z - z0 as f64)
}

#[inline]
fn trilinear_raw<F: Fn(usize, usize, usize) -> f64>(
    grid: &Grid3,
    p: [f64; 3],
    get: F,
) -> f64 {
    let (nx, ny, nz) = grid.dims();
    let (x0, y0, z0, fx, fy, fz) = cell_of(grid, p);
    // Exact node hit: return the stored value untouched.
    if fx == 0.0 && fy == 0.0 && fz == 0.0 {
        return get(x0, y0, z0);
    }
    let x1 = (x0 + 1).min(nx - 1);
    let y1 = (y0 + 1).min(ny - 1);
    let z1 = (z0 + 1).min(nz - 1);
    // Nested lerps: exact on constants (a + t*(a-a) = a) and on node hits.
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    let c00 = lerp(get(x0, y0, z0), get(x1, y0, z0), fx);
    let c10 = lerp(get(x0, y1, z0), get(x1, y1, z0), fx);
    let c01 = lerp(get(x0, y0, z1), get(x1, y0, z1), fx);
    let c11 = lerp(get(x0, y1, z1), get(x1, y1, z1), fx);
    lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
}

/// Trilinear sample of a non-label volume at a continuous voxel-space point.
pub fn sample_trilinear(vol: &ScalarVolume, p: [f64; 3]) -> Result<f64> {
    if vol.kind() == ScalarKind::Label {
        return Err(Error::InvalidKind { expected: "intensity or jacobian", got: "label" });
    }
    if !(p[0].is_finite() && p[1].is_finite() && p[2].is_finite()) {
        return Err(Error::NonFinite("sample point"));
    }
    Ok(trilinear_raw(vol.grid(), p, |i, j, k| vol.at(i, j, k)))
}

/// Nearest-neighbour sample; the only interpolation that makes sense for
/// label volumes.
pub fn sample_nearest(vol: &ScalarVolume, p: [f64; 3]) -> Result<f64> {
    if !(p[0].is_finite() && p[1].is_finite() && p[2].is_finite()) {
        return Err(Error::NonFinite("sample point"));
    }
    let (nx, ny, nz) = vol.grid().dims();
    let i = clamp_axis(p[0], nx).round() as usize;
    let j = clamp_axis(p[1], ny).round() as usize;
    let k = clamp_axis(p[2], nz).round() as usize;
    Ok(vol.at(i.min(nx - 1), j.min(ny - 1), k.min(nz - 1)))
}

/// Trilinear sample of a field's stored components (offsets for
/// transformations). Exact node hits return stored components bit-for-bit.
pub(crate) fn sample_raw_components(field: &VectorField, p: [f64; 3]) -> [f64; 3] {
    let grid = field.grid();
    let (x0, y0, z0, fx, fy, fz) = cell_of(grid, p);
    if fx == 0.0 && fy == 0.0 && fz == 0.0 {
        return field.raw_at(grid.index(x0, y0, z0));
    }
    [
        trilinear_raw(grid, p, |i, j, k| field.offset_at(i, j, k)[0]),
        trilinear_raw(grid, p, |i, j, k| field.offset_at(i, j, k)[1]),
        trilinear_raw(grid, p, |i, j, k| field.offset_at(i, j, k)[2]),
    ]
}

/// Pull-back warp: output(p) = vol(phi(p)). Labels use nearest-neighbour,
/// everything else trilinear interpolation; the kind is preserved.
pub fn warp(vol: &ScalarVolume, phi: &VectorField) -> Result<ScalarVolume> {
    vol.grid().ensure_compatible(phi.grid(), "warp")?;
    phi.ensure_kind(FieldKind::Transformation)?;
    let grid = *vol.grid();
    let nearest = vol.kind() == ScalarKind::Label;
    let mut out = vec![0.0; grid.len()];
    par::fill_indexed(&mut out, |idx| {
        let (i, j, k) = grid.coords(idx);
        let u = phi.raw_at(idx);
        let q = [u[0] + i as f64, u[1] + j as f64, u[2] + k as f64];
        if nearest {
            let (nx, ny, nz) = grid.dims();
            let qi = clamp_axis(q[0], nx).round() as usize;
            let qj = clamp_axis(q[1], ny).round() as usize;
            let qk = clamp_axis(q[2], nz).round() as usize;
            vol.at(qi.min(nx - 1), qj.min(ny - 1), qk.min(nz - 1))
        } else {
            trilinear_raw(&grid, q, |a, b, c| vol.at(a, b, c))
        }
    });
    ScalarVolume::new(grid, vol.kind(), out)
}

/// Composition of transformations: result(p) = outer(inner(p)).
/// Offsets add: u(p) = u_inner(p) + u_outer(inner(p)), with the outer
/// offsets sampled trilinearly (clamped at the boundary).
pub fn compose(outer: &VectorField, inner: &VectorField) -> Result<VectorField> {
    outer.grid().ensure_compatible(inner.grid(), "compose")?;
    outer.ensure_kind(FieldKind::Transformation)?;
    inner.ensure_kind(FieldKind::Transformation)?;
    let grid = *inner.grid();
    let mut data = vec![[0.0; 3]; grid.len()];
    par::fill_indexed(&mut data, |idx| {
        let (i, j, k) = grid.coords(idx);
        let ui = inner.raw_at(idx);
        let q = [ui[0] + i as f64, ui[1] + j as f64, ui[2] + k as f64];
        let uo = sample_raw_components(outer, q);
        [ui[0] + uo[0], ui[1] + uo[1], ui[2] + uo[2]]
    });
    VectorField::from_raw(grid, FieldKind::Transformation, data)
}
