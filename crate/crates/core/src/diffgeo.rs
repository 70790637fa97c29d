//! Differential-geometric features of a deformation: the Jacobian
//! determinant (local volume-change ratio) and the curl vector (local
//! rotation). Derivatives are taken in voxel units with central differences
//! in the interior and one-sided differences on the boundary faces.

use crate::error::{Error, Result};
use crate::fields::{FieldKind, ScalarKind, ScalarVolume, VectorField};
use crate::par;
use crate::stencil::{diff, Axis};

fn ensure_deformation_kind(field: &VectorField) -> Result<bool> {
    match field.kind() {
        FieldKind::Transformation => Ok(true),
        // A displacement is treated as id + u; the identity part contributes
        // exactly one to each diagonal derivative and nothing else.
        FieldKind::Displacement => Ok(false),
        k => Err(Error::InvalidKind { expected: "transformation or displacement", got: k.name() }),
    }
}

/// Per-voxel determinant of the 3x3 matrix of spatial partials of phi.
pub fn jacobian_determinant(phi: &VectorField) -> Result<ScalarVolume> {
    ensure_deformation_kind(phi)?;
    let grid = *phi.grid();
    let n = grid.len();

    // d(component a)/d(axis b) of the offsets; the identity map adds 1 on
    // the diagonal for both accepted kinds.
    let mut partials: [[Vec<f64>; 3]; 3] =
        std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; n]));
    for (a, row) in partials.iter_mut().enumerate() {
        for (buf, axis) in row.iter_mut().zip([Axis::X, Axis::Y, Axis::Z]) {
            diff(&grid, axis, |idx| phi.raw_at(idx)[a], buf);
        }
    }

    let mut out = vec![0.0; n];
    par::fill_indexed(&mut out, |idx| {
        let m = |a: usize, b: usize| partials[a][b][idx] + if a == b { 1.0 } else { 0.0 };
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    });
    ScalarVolume::new(grid, ScalarKind::Jacobian, out)
}

/// Per-voxel curl (d3/dy - d2/dz, d1/dz - d3/dx, d2/dx - d1/dy).
///
/// Transformation and displacement inputs give identical results: the
/// identity map only affects diagonal derivatives, which curl never uses.
pub fn curl(phi: &VectorField) -> Result<VectorField> {
    ensure_deformation_kind(phi)?;
    let grid = *phi.grid();
    let n = grid.len();

    let d = |a: usize, axis: Axis| {
        let mut buf = vec![0.0; n];
        diff(&grid, axis, |idx| phi.raw_at(idx)[a], &mut buf);
        buf
    };
    let d3y = d(2, Axis::Y);
    let d2z = d(1, Axis::Z);
    let d1z = d(0, Axis::Z);
    let d3x = d(2, Axis::X);
    let d2x = d(1, Axis::X);
    let d1y = d(0, Axis::Y);

    let mut out = vec![[0.0; 3]; n];
    par::fill_indexed(&mut out, |idx| {
        [d3y[idx] - d2z[idx], d1z[idx] - d3x[idx], d2x[idx] - d1y[idx]]
    });
    VectorField::from_raw(grid, FieldKind::Curl, out)
}

/// Fraction of (masked) voxels where the Jacobian determinant is <= 0,
/// i.e. where the deformation folds. Nonzero mask entries select the
/// non-background voxels.
pub fn negative_jacobian_fraction(
    jd: &ScalarVolume,
    mask: Option<&ScalarVolume>,
) -> Result<f64> {
    if jd.kind() != ScalarKind::Jacobian {
        return Err(Error::InvalidKind { expected: "jacobian", got: jd.kind().name() });
    }
    let n = jd.grid().len();
    match mask {
        None => {
            let neg = par::count_indexed(n, |i| jd.data()[i] <= 0.0);
            Ok(neg as f64 / n as f64)
        }
        Some(m) => {
            jd.grid().ensure_compatible(m.grid(), "negative_jacobian_fraction")?;
            let total = par::count_indexed(n, |i| m.data()[i] != 0.0);
            if total == 0 {
                return Err(Error::EmptyMask);
            }
            let neg = par::count_indexed(n, |i| m.data()[i] != 0.0 && jd.data()[i] <= 0.0);
            Ok(neg as f64 / total as f64)
        }
    }
}
