//! Intensity-based registration: gradient descent on a stationary velocity
//! field minimizing half the mean squared intensity difference between the
//! warped moving image and the fixed image, plus a small gradient-energy
//! penalty on the velocity. Coarse-to-fine over a box-downsampled pyramid.
//!
//! The data-term force is the demons-style approximation: residual times
//! the spatial gradient of the warped moving image, Gaussian-smoothed each
//! iteration. Steps are accepted only when the objective decreases, so the
//! per-level history is non-increasing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{warp, FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField};
use crate::metrics::ssd_value;
use crate::par;
use crate::smooth;
use crate::stencil::{diff, diff_adjoint, AXES};
use crate::svf;
use crate::varsolve::SolveReport;

#[derive(Debug, Clone, Serialize)]
pub struct RegistrationOptions {
    /// Pyramid depth; each extra level halves the resolution.
    pub levels: usize,
    /// Accepted-step budget per level.
    pub iters: usize,
    /// Initial step length in voxels of the current level.
    pub step: f64,
    /// Gaussian sigma (voxels) applied to the velocity update.
    pub sigma: f64,
    /// Squaring steps for the velocity exponential.
    pub svf_steps: usize,
    /// Weight of the mean |grad z|^2 penalty. Zero is allowed: the raw
    /// data term alone is ill-posed but remains available for fidelity.
    pub lambda_reg: f64,
    pub tol_rel: f64,
    pub tol_window: usize,
    pub max_halvings: usize,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self {
            levels: 3,
            iters: 100,
            step: 1.0,
            sigma: 1.5,
            svf_steps: svf::DEFAULT_STEPS,
            lambda_reg: 0.01,
            tol_rel: 1e-6,
            tol_window: 10,
            max_halvings: 20,
        }
    }
}

impl RegistrationOptions {
    fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.levels > 5 {
            return Err(Error::InvalidArgument(format!(
                "pyramid levels must be in 1..=5, got {}",
                self.levels
            )));
        }
        if self.iters == 0 || self.step <= 0.0 || self.sigma < 0.0 || self.lambda_reg < 0.0 {
            return Err(Error::InvalidArgument("registration options out of range".into()));
        }
        Ok(())
    }
}

/// Per-image normalization recorded in the report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistrationReport {
    pub moving_norm: NormalizationStats,
    pub fixed_norm: NormalizationStats,
    /// Data term between the normalized inputs before optimization.
    pub initial_ssd: f64,
    /// Data term between warped moving and fixed after optimization.
    pub final_ssd: f64,
    /// Objective history per pyramid level, coarsest first.
    pub levels: Vec<SolveReport>,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(vol: &ScalarVolume) -> (ScalarVolume, NormalizationStats) {
    let n = vol.grid().len();
    let mean = vol.mean();
    let var = par::sum_indexed(n, |i| {
        let d = vol.data()[i] - mean;
        d * d
    }) / n as f64;
    let std = var.sqrt().max(f64::MIN_POSITIVE);
    let data = vol.data().iter().map(|v| (v - mean) / std).collect();
    (
        ScalarVolume::new(*vol.grid(), ScalarKind::Intensity, data).expect("same length"),
        NormalizationStats { mean, std },
    )
}

/// 2x box-average downsampling; odd trailing samples average what exists.
fn downsample(vol: &ScalarVolume) -> Result<ScalarVolume> {
    let (nx, ny, nz) = vol.grid().dims();
    let (sx, sy, sz) = vol.grid().spacing();
    let half = |n: usize| n.div_ceil(2).max(2);
    let grid = Grid3::with_spacing(half(nx), half(ny), half(nz), sx * 2.0, sy * 2.0, sz * 2.0)?;
    let mut out = vec![0.0; grid.len()];
    par::fill_indexed(&mut out, |idx| {
        let (i, j, k) = grid.coords(idx);
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for dk in 0..2 {
            for dj in 0..2 {
                for di in 0..2 {
                    let (a, b, c) = (2 * i + di, 2 * j + dj, 2 * k + dk);
                    if a < nx && b < ny && c < nz {
                        acc += vol.at(a, b, c);
                        cnt += 1.0;
                    }
                }
            }
        }
        acc / cnt
    });
    ScalarVolume::new(grid, vol.kind(), out)
}

/// Transfer a coarse velocity to a finer grid: trilinear sampling at half
/// coordinates, components doubled to stay in the finer grid's voxel units.
fn upsample_velocity(z: &VectorField, fine: Grid3) -> Result<VectorField> {
    let mut data = vec![[0.0; 3]; fine.len()];
    par::fill_indexed(&mut data, |idx| {
        let (i, j, k) = fine.coords(idx);
        let q = [i as f64 * 0.5, j as f64 * 0.5, k as f64 * 0.5];
        let v = crate::fields::sample_raw_components(z, q);
        [2.0 * v[0], 2.0 * v[1], 2.0 * v[2]]
    });
    VectorField::from_raw(fine, FieldKind::Velocity, data)
}

/// mean over voxels of sum_{a,b} (D_b z_a)^2.
fn gradient_energy(z: &VectorField) -> f64 {
    let grid = *z.grid();
    let n = grid.len();
    let mut total = 0.0;
    let mut buf = vec![0.0; n];
    for a in 0..3 {
        for axis in AXES {
            diff(&grid, axis, |idx| z.raw_at(idx)[a], &mut buf);
            total += par::sum_indexed(n, |i| buf[i] * buf[i]);
        }
    }
    total / n as f64
}

struct Objective<'a> {
    moving: &'a ScalarVolume,
    fixed: &'a ScalarVolume,
    lambda: f64,
    svf_steps: usize,
}

impl Objective<'_> {
    fn eval(&self, z: &VectorField) -> Result<(f64, VectorField, ScalarVolume)> {
        let phi = svf::exponentiate(z, self.svf_steps)?;
        let warped = warp(self.moving, &phi)?;
        let mut value = ssd_value(&warped, self.fixed)?;
        if self.lambda > 0.0 {
            value += self.lambda * gradient_energy(z);
        }
        Ok((value, phi, warped))
    }

    /// Approximate objective gradient: data force r * grad(warped) plus the
    /// exact adjoint of the gradient-energy term.
    fn force(&self, z: &VectorField, warped: &ScalarVolume) -> Vec<[f64; 3]> {
        let grid = *warped.grid();
        let n = grid.len();
        let inv_n = 1.0 / n as f64;

        let mut force = vec![[0.0; 3]; n];
        let mut dbuf = vec![0.0; n];
        for (axis_idx, axis) in AXES.iter().enumerate() {
            diff(&grid, *axis, |i| warped.data()[i], &mut dbuf);
            for (i, f) in force.iter_mut().enumerate() {
                let r = warped.data()[i] - self.fixed.data()[i];
                f[axis_idx] += r * dbuf[i] * inv_n;
            }
        }
        if self.lambda > 0.0 {
            let mut adj = vec![0.0; n];
            for a in 0..3 {
                for axis in AXES {
                    diff(&grid, axis, |idx| z.raw_at(idx)[a], &mut dbuf);
                    diff_adjoint(&grid, axis, |idx| dbuf[idx], &mut adj);
                    for (f, &v) in force.iter_mut().zip(adj.iter()) {
                        f[a] += 2.0 * self.lambda * inv_n * v;
                    }
                }
            }
        }
        force
    }
}

fn solve_level(
    moving: &ScalarVolume,
    fixed: &ScalarVolume,
    z0: VectorField,
    opts: &RegistrationOptions,
) -> Result<(VectorField, SolveReport)> {
    let grid = *moving.grid();
    let n = grid.len();
    let objective = Objective {
        moving,
        fixed,
        lambda: opts.lambda_reg,
        svf_steps: opts.svf_steps,
    };

    let mut z = z0;
    let (mut value, _, mut warped) = objective.eval(&z)?;
    let mut history = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    let mut tau_start = opts.step;

    for _ in 0..opts.iters {
        if value <= 1e-14 {
            converged = true;
            break;
        }
        let mut dir = objective.force(&z, &warped);
        smooth::smooth_components(&grid, opts.sigma, &mut dir);
        let ginf = par::max_indexed(n, |i| {
            let v = dir[i];
            v[0].abs().max(v[1].abs()).max(v[2].abs())
        });
        if ginf == 0.0 {
            converged = true;
            break;
        }
        let inv = 1.0 / ginf;

        let mut tau = tau_start;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = vec![[0.0; 3]; n];
            par::fill_indexed(&mut trial, |i| {
                let u = z.raw_at(i);
                let d = dir[i];
                [u[0] - tau * inv * d[0], u[1] - tau * inv * d[1], u[2] - tau * inv * d[2]]
            });
            let trial_z = VectorField::from_raw(grid, FieldKind::Velocity, trial)?;
            let (trial_value, _, trial_warped) = objective.eval(&trial_z)?;
            if trial_value < value {
                accepted = Some((trial_z, trial_value, trial_warped));
                break;
            }
            tau *= 0.5;
        }
        match accepted {
            Some((tz, tv, tw)) => {
                z = tz;
                value = tv;
                warped = tw;
            }
            None => break,
        }
        tau_start = (tau * 2.0).min(opts.step);
        iterations += 1;
        history.push(value);

        if history.len() > opts.tol_window {
            let prev = history[history.len() - 1 - opts.tol_window];
            if (prev - value) / prev.max(f64::MIN_POSITIVE) < opts.tol_rel {
                converged = true;
                break;
            }
        }
    }

    Ok((z, SolveReport { iterations, final_value: value, history, converged }))
}

/// Register `moving` onto `fixed`: returns the stationary velocity, its
/// exponential (the transformation), and the optimization report.
/// Intensities are normalized to zero mean, unit variance internally.
pub fn register(
    moving: &ScalarVolume,
    fixed: &ScalarVolume,
    opts: &RegistrationOptions,
) -> Result<(VectorField, VectorField, RegistrationReport)> {
    opts.validate()?;
    moving.grid().ensure_compatible(fixed.grid(), "register")?;
    if !moving.all_finite() || !fixed.all_finite() {
        return Err(Error::NonFinite("registration input intensities"));
    }

    let (mov_n, mov_stats) = normalize(moving);
    let (fix_n, fix_stats) = normalize(fixed);
    let initial_ssd = ssd_value(&mov_n, &fix_n)?;

    // Pyramid, full resolution first.
    let mut mov_pyr = vec![mov_n.clone()];
    let mut fix_pyr = vec![fix_n.clone()];
    for _ in 1..opts.levels {
        let next_m = downsample(mov_pyr.last().unwrap())?;
        let next_f = downsample(fix_pyr.last().unwrap())?;
        // Stop refining once the grid bottoms out.
        if next_m.grid().dims() == mov_pyr.last().unwrap().grid().dims() {
            break;
        }
        mov_pyr.push(next_m);
        fix_pyr.push(next_f);
    }

    let coarsest = mov_pyr.len() - 1;
    let mut z = VectorField::zeros(*mov_pyr[coarsest].grid(), FieldKind::Velocity);
    let mut levels = Vec::new();
    for level in (0..=coarsest).rev() {
        if level != coarsest {
            z = upsample_velocity(&z, *mov_pyr[level].grid())?;
        }
        let (z_next, report) = solve_level(&mov_pyr[level], &fix_pyr[level], z, opts)?;
        z = z_next;
        levels.push(report);
    }

    let phi = svf::exponentiate(&z, opts.svf_steps)?;
    let final_ssd = ssd_value(&warp(&mov_n, &phi)?, &fix_n)?;
    let iterations = levels.iter().map(|l| l.iterations).sum();
    let converged = levels.last().map(|l| l.converged).unwrap_or(false);
    let report = RegistrationReport {
        moving_norm: mov_stats,
        fixed_norm: fix_stats,
        initial_ssd,
        final_ssd,
        levels,
        iterations,
        converged,
    };
    Ok((z, phi, report))
}
