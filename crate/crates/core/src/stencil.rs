//! Finite-difference stencils shared by the geometry extraction and the
//! variational solvers: central differences in the interior, one-sided on
//! the boundary faces, all in voxel units. `diff_adjoint` is the exact
//! transpose of `diff`, which the gradient checks rely on.

use crate::fields::Grid3;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    X,
    Y,
    Z,
}

pub(crate) const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

impl Axis {
    #[inline]
    fn stride_len(self, grid: &Grid3) -> (usize, usize) {
        let (nx, ny, nz) = grid.dims();
        match self {
            Axis::X => (1, nx),
            Axis::Y => (nx, ny),
            Axis::Z => (nx * ny, nz),
        }
    }

    #[inline]
    fn coord(self, i: usize, j: usize, k: usize) -> usize {
        match self {
            Axis::X => i,
            Axis::Y => j,
            Axis::Z => k,
        }
    }
}

/// Partial derivative along `axis` of a scalar sampled through `get`.
pub(crate) fn diff<F>(grid: &Grid3, axis: Axis, get: F, out: &mut [f64])
where
    F: Fn(usize) -> f64 + Sync,
{
    let g = *grid;
    let (stride, n) = axis.stride_len(&g);
    par::fill_indexed(out, |idx| {
        let (i, j, k) = g.coords(idx);
        let c = axis.coord(i, j, k);
        if c == 0 {
            get(idx + stride) - get(idx)
        } else if c == n - 1 {
            get(idx) - get(idx - stride)
        } else {
            0.5 * (get(idx + stride) - get(idx - stride))
        }
    });
}

/// Adjoint (transpose) of [`diff`]: out = D^T w. Written as a gather so the
/// parallel path stays race-free and deterministic.
pub(crate) fn diff_adjoint<F>(grid: &Grid3, axis: Axis, w: F, out: &mut [f64])
where
    F: Fn(usize) -> f64 + Sync,
{
    let g = *grid;
    let (stride, n) = axis.stride_len(&g);
    par::fill_indexed(out, |idx| {
        let (i, j, k) = g.coords(idx);
        let c = axis.coord(i, j, k);
        let mut acc = 0.0;
        // Interior rows j = c-1 and j = c+1 touch column c with +-1/2.
        if c >= 2 {
            acc += 0.5 * w(idx - stride);
        }
        if c + 3 <= n {
            acc -= 0.5 * w(idx + stride);
        }
        // One-sided boundary rows.
        if c == 0 {
            acc -= w(idx);
        }
        if c == 1 {
            acc += w(idx - stride);
        }
        if c == n - 2 {
            acc -= w(idx + stride);
        }
        if c == n - 1 {
            acc += w(idx);
        }
        acc
    });
}

/// All nine partial derivatives of a three-component field given through
/// `get(idx) -> [f64; 3]`; `out[a][b]` holds d(component a)/d(axis b).
pub(crate) fn gradient3<F>(grid: &Grid3, get: F) -> [[Vec<f64>; 3]; 3]
where
    F: Fn(usize) -> [f64; 3] + Sync + Copy,
{
    let n = grid.len();
    let mut out: [[Vec<f64>; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; n]));
    for (a, row) in out.iter_mut().enumerate() {
        for (b, buf) in row.iter_mut().enumerate() {
            diff(grid, AXES[b], move |idx| get(idx)[a], buf);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> Vec<Grid3> {
        vec![
            Grid3::new(2, 2, 2).unwrap(),
            Grid3::new(3, 2, 4).unwrap(),
            Grid3::new(5, 4, 3).unwrap(),
        ]
    }

    #[test]
    fn diff_is_exact_on_linear_ramps() {
        let g = Grid3::new(5, 4, 3).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|idx| {
                let (i, j, k) = g.coords(idx);
                2.0 * i as f64 - 3.0 * j as f64 + 0.5 * k as f64 + 1.0
            })
            .collect();
        let mut out = vec![0.0; g.len()];
        diff(&g, Axis::X, |i| vals[i], &mut out);
        assert!(out.iter().all(|&d| (d - 2.0).abs() < 1e-14));
        diff(&g, Axis::Y, |i| vals[i], &mut out);
        assert!(out.iter().all(|&d| (d + 3.0).abs() < 1e-14));
        diff(&g, Axis::Z, |i| vals[i], &mut out);
        assert!(out.iter().all(|&d| (d - 0.5).abs() < 1e-14));
    }

    #[test]
    fn adjoint_matches_transpose_inner_product() {
        // <D f, w> == <f, D^T w> for random data on several grids and axes.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for g in dims() {
            for axis in AXES {
                let n = g.len();
                let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut df = vec![0.0; n];
                diff(&g, axis, |i| f[i], &mut df);
                let mut dtw = vec![0.0; n];
                diff_adjoint(&g, axis, |i| w[i], &mut dtw);
                let lhs: f64 = df.iter().zip(&w).map(|(a, b)| a * b).sum();
                let rhs: f64 = f.iter().zip(&dtw).map(|(a, b)| a * b).sum();
                assert!(
                    (lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0),
                    "axis {axis:?} grid {:?}: {lhs} vs {rhs}",
                    g.dims()
                );
            }
        }
    }
}
