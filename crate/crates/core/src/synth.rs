//! Deterministic synthetic inputs for tests, benchmarks and the CLI.
//!
//! Every generator is a pure function of its parameters and seed
//! (ChaCha8-based), so repeated runs are byte-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fields::{FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField};
use crate::smooth;

/// Smooth random velocity: per-component white noise smoothed with a
/// Gaussian (sigma in voxels), tapered to zero toward the faces over
/// `taper` voxels, then rescaled so the largest |component| equals `amp`.
///
/// The taper keeps the flow compactly supported, which is what the
/// boundary-clamped exponentiation and the fixed-boundary reconstruction
/// both assume of their inputs.
pub fn smooth_velocity(grid: Grid3, amp: f64, sigma: f64, taper: f64, seed: u64) -> Result<VectorField> {
    if !(amp.is_finite() && amp >= 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {amp}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let mut data = vec![[0.0; 3]; n];
    for v in data.iter_mut() {
        for c in v.iter_mut() {
            *c = rng.sample::<f64, _>(StandardNormal);
        }
    }
    smooth::smooth_components(&grid, sigma, &mut data);

    if taper > 0.0 {
        let (nx, ny, nz) = grid.dims();
        let window = |c: usize, n: usize| -> f64 {
            let d = (c.min(n - 1 - c)) as f64 / taper;
            let t = d.min(1.0);
            t * t * (3.0 - 2.0 * t)
        };
        for (idx, v) in data.iter_mut().enumerate() {
            let (i, j, k) = grid.coords(idx);
            let w = window(i, nx) * window(j, ny) * window(k, nz);
            for c in v.iter_mut() {
                *c *= w;
            }
        }
    }

    let max = data
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |m, &c| m.max(c.abs()));
    if max > 0.0 {
        let target = amp;
        for v in data.iter_mut() {
            for c in v.iter_mut() {
                *c = (*c / max) * target;
            }
        }
    }
    VectorField::from_raw(grid, FieldKind::Velocity, data)
}

/// Default smooth-velocity parameters: noise sigma 4 voxels, 6-voxel taper.
/// The taper width keeps the window's curvature low enough that repeated
/// trilinear compositions of the flow stay consistent with the inverse flow
/// to well under a tenth of a voxel.
pub fn smooth_velocity_default(grid: Grid3, amp: f64, seed: u64) -> Result<VectorField> {
    smooth_velocity(grid, amp, 4.0, 6.0, seed)
}

/// Smooth multi-blob intensity phantom in [0, 1]: an ellipsoidal envelope
/// filled with seeded Gaussian blobs of mixed scales, loosely head-shaped.
/// The blob count keeps intensity gradients present through most of the
/// interior, which intensity-driven registration needs.
pub fn phantom(grid: Grid3, seed: u64) -> ScalarVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, ny, nz) = grid.dims();
    let center = [(nx - 1) as f64 / 2.0, (ny - 1) as f64 / 2.0, (nz - 1) as f64 / 2.0];
    let radii = [0.42 * nx as f64, 0.42 * ny as f64, 0.42 * nz as f64];

    const BLOBS: usize = 14;
    let mut blobs = Vec::with_capacity(BLOBS);
    for b in 0..BLOBS {
        let c = [
            center[0] + rng.gen_range(-0.6..0.6) * radii[0],
            center[1] + rng.gen_range(-0.6..0.6) * radii[1],
            center[2] + rng.gen_range(-0.6..0.6) * radii[2],
        ];
        // First few blobs are broad structures, the rest finer texture.
        let width = if b < 4 {
            rng.gen_range(0.16..0.30)
        } else {
            rng.gen_range(0.05..0.14)
        } * nx.min(ny).min(nz) as f64;
        let amp = rng.gen_range(0.15..0.55);
        blobs.push((c, width, amp));
    }

    ScalarVolume::from_fn(grid, ScalarKind::Intensity, |i, j, k| {
        let p = [i as f64, j as f64, k as f64];
        let rho = ((p[0] - center[0]) / radii[0]).powi(2)
            + ((p[1] - center[1]) / radii[1]).powi(2)
            + ((p[2] - center[2]) / radii[2]).powi(2);
        let rho = rho.sqrt();
        // Smooth envelope: 1 well inside, 0 outside the ellipsoid.
        let t = ((1.0 - rho) / 0.15).clamp(0.0, 1.0);
        let envelope = t * t * (3.0 - 2.0 * t);
        if envelope == 0.0 {
            return 0.0;
        }
        let mut v = 0.25;
        for (c, width, amp) in &blobs {
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
            v += amp * (-0.5 * d2 / (width * width)).exp();
        }
        (envelope * v).min(1.0)
    })
}

/// Fully textured volume: Gaussian-smoothed white noise rescaled to [0, 1].
/// Unlike [`phantom`], intensity gradients are present everywhere, so a
/// deformation acting on it is recoverable everywhere; registration
/// consistency checks rely on that.
pub fn textured(grid: Grid3, sigma: f64, seed: u64) -> ScalarVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..grid.len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let smoothed = smooth::smooth_scalar(&grid, sigma, &raw);
    let (min, max) = smoothed
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (max - min).max(f64::MIN_POSITIVE);
    let data = smoothed.into_iter().map(|v| (v - min) / span).collect();
    ScalarVolume::new(grid, ScalarKind::Intensity, data).expect("length preserved")
}

/// Centered binary ball of the given radius (in voxels), written as a label
/// volume with foreground label 1.
pub fn ball_mask(grid: Grid3, radius: f64) -> Result<ScalarVolume> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let (nx, ny, nz) = grid.dims();
    let center = [(nx - 1) as f64 / 2.0, (ny - 1) as f64 / 2.0, (nz - 1) as f64 / 2.0];
    let r2 = radius * radius;
    Ok(ScalarVolume::from_fn(grid, ScalarKind::Label, |i, j, k| {
        let d2 = (i as f64 - center[0]).powi(2)
            + (j as f64 - center[1]).powi(2)
            + (k as f64 - center[2]).powi(2);
        if d2 <= r2 {
            1.0
        } else {
            0.0
        }
    }))
}

/// Constant-shift transformation phi(p) = p + shift.
pub fn translation_field(grid: Grid3, shift: [f64; 3]) -> Result<VectorField> {
    if shift.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("translation shift"));
    }
    Ok(VectorField::from_fn_raw(grid, FieldKind::Transformation, |_, _, _| shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_is_seed_deterministic() {
        let g = Grid3::cube(16).unwrap();
        let a = smooth_velocity_default(g, 1.5, 7).unwrap();
        let b = smooth_velocity_default(g, 1.5, 7).unwrap();
        assert_eq!(a, b);
        let c = smooth_velocity_default(g, 1.5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn velocity_hits_requested_amplitude() {
        let g = Grid3::cube(24).unwrap();
        let z = smooth_velocity_default(g, 2.0, 3).unwrap();
        assert_eq!(z.max_abs_component(), 2.0);
        assert!(z.all_finite());
    }

    #[test]
    fn velocity_vanishes_at_faces() {
        let g = Grid3::cube(16).unwrap();
        let z = smooth_velocity_default(g, 1.0, 5).unwrap();
        for j in 0..16 {
            for i in 0..16 {
                assert_eq!(z.offset_at(i, j, 0), [0.0; 3]);
                assert_eq!(z.offset_at(i, j, 15), [0.0; 3]);
                assert_eq!(z.offset_at(i, 0, j), [0.0; 3]);
                assert_eq!(z.offset_at(0, i, j), [0.0; 3]);
            }
        }
    }

    #[test]
    fn ball_mask_volume_matches_analytic() {
        let g = Grid3::cube(32).unwrap();
        let r = 10.0;
        let mask = ball_mask(g, r).unwrap();
        let count: f64 = mask.data().iter().sum();
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        let rel = (count - analytic).abs() / analytic;
        assert!(rel < 0.05, "count {count} vs analytic {analytic} (rel {rel})");
    }

    #[test]
    fn phantom_is_bounded_and_deterministic() {
        let g = Grid3::cube(24).unwrap();
        let p = phantom(g, 9);
        assert_eq!(p, phantom(g, 9));
        let (min, max) = p.min_max();
        assert!(min >= 0.0 && max <= 1.0 && max > 0.2);
    }

    #[test]
    fn translation_is_exact() {
        let g = Grid3::cube(8).unwrap();
        let t = translation_field(g, [3.0, 0.0, 0.0]).unwrap();
        assert!(t.raw().iter().all(|v| *v == [3.0, 0.0, 0.0]));
    }
}
