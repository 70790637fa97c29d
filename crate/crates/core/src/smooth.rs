//! Separable Gaussian smoothing in voxel units. The kernel is truncated at
//! three sigma and renormalized over the in-bounds support near the faces,
//! so constants stay constant up to the boundary.

use crate::fields::Grid3;
use crate::par;

fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut w: Vec<f64> = (0..=2 * radius)
        .map(|t| {
            let d = t as f64 - radius as f64;
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

fn smooth_axis(grid: &Grid3, axis: usize, w: &[f64], src: &[f64], out: &mut [f64]) {
    let g = *grid;
    let radius = w.len() / 2;
    let (stride, n) = match axis {
        0 => (1usize, g.nx()),
        1 => (g.nx(), g.ny()),
        _ => (g.nx() * g.ny(), g.nz()),
    };
    par::fill_indexed(out, |idx| {
        let (i, j, k) = g.coords(idx);
        let c = match axis {
            0 => i,
            1 => j,
            _ => k,
        };
        let lo = c.saturating_sub(radius);
        let hi = (c + radius).min(n - 1);
        let mut acc = 0.0;
        let mut norm = 0.0;
        for t in lo..=hi {
            let wt = w[t + radius - c];
            let nb = if t >= c { idx + (t - c) * stride } else { idx - (c - t) * stride };
            acc += wt * src[nb];
            norm += wt;
        }
        acc / norm
    });
}

/// Gaussian-smooth a scalar lattice; `sigma <= 0` returns the input copied.
pub(crate) fn smooth_scalar(grid: &Grid3, sigma: f64, src: &[f64]) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let w = kernel(sigma);
    let mut a = vec![0.0; src.len()];
    let mut b = vec![0.0; src.len()];
    smooth_axis(grid, 0, &w, src, &mut a);
    smooth_axis(grid, 1, &w, &a, &mut b);
    smooth_axis(grid, 2, &w, &b, &mut a);
    a
}

/// Smooth each component of packed three-vectors independently.
pub(crate) fn smooth_components(grid: &Grid3, sigma: f64, data: &mut [[f64; 3]]) {
    if sigma <= 0.0 {
        return;
    }
    for c in 0..3 {
        let comp: Vec<f64> = data.iter().map(|v| v[c]).collect();
        let smoothed = smooth_scalar(grid, sigma, &comp);
        for (v, s) in data.iter_mut().zip(smoothed) {
            v[c] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let w = kernel(1.5);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for i in 0..w.len() / 2 {
            assert_eq!(w[i], w[w.len() - 1 - i]);
        }
    }

    #[test]
    fn constants_are_preserved_everywhere() {
        let g = Grid3::new(6, 5, 4).unwrap();
        let src = vec![2.5; g.len()];
        let out = smooth_scalar(&g, 2.0, &src);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn smoothing_reduces_oscillation() {
        let g = Grid3::cube(8).unwrap();
        let src: Vec<f64> = (0..g.len()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let out = smooth_scalar(&g, 1.0, &src);
        let amp_in = src.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
        let amp_out = out.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(amp_out < 0.5 * amp_in);
    }
}
