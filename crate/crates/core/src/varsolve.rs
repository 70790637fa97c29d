//! Variational construction of a transformation with prescribed Jacobian
//! determinant and curl.
//!
//! Minimizes the voxel-mean functional
//!
//! ```text
//! E(u) = mean_p 1/2 [ (J(id + u) - f0)^2 + lambda * |curl(id + u) - g0|^2 ]
//! ```
//!
//! over displacements u that vanish on the boundary (Dirichlet), by
//! gradient descent with backtracking. The gradient is assembled through
//! the exact adjoints of the finite-difference stencils; the determinant
//! term uses the cofactor identity d det(M)/dM = cof(M). A Gaussian
//! smoothing of the gradient acts as preconditioner. Steps are normalized
//! to max-component 1 so `step` is a length in voxels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField};
use crate::par;
use crate::smooth;
use crate::stencil::{diff_adjoint, gradient3, AXES};

/// Prescribed per-voxel targets: a volume-change map `f0` and a curl map
/// `g0` on a shared grid.
#[derive(Debug, Clone)]
pub struct MonitorPair {
    f0: ScalarVolume,
    g0: VectorField,
}

impl MonitorPair {
    /// Validates kinds, grids and positivity of `f0`. A mean of `f0` far
    /// from 1 makes the targets unrealizable on a fixed domain; that is
    /// reported by [`MonitorPair::solvability_warning`], not an error.
    pub fn new(f0: ScalarVolume, g0: VectorField) -> Result<Self> {
        if f0.kind() != ScalarKind::Jacobian {
            return Err(Error::InvalidKind { expected: "jacobian", got: f0.kind().name() });
        }
        g0.ensure_kind(FieldKind::Curl)?;
        f0.grid().ensure_compatible(g0.grid(), "monitor pair")?;
        let min = -par::max_indexed(f0.data().len(), |i| -f0.data()[i]);
        if !min.is_finite() || min <= 0.0 {
            return Err(Error::NonPositiveMonitor { min });
        }
        if !g0.all_finite() {
            return Err(Error::NonFinite("curl monitor"));
        }
        Ok(Self { f0, g0 })
    }

    pub fn f0(&self) -> &ScalarVolume {
        &self.f0
    }

    pub fn g0(&self) -> &VectorField {
        &self.g0
    }

    pub fn grid(&self) -> &Grid3 {
        self.f0.grid()
    }

    /// Total prescribed volume must be roughly realizable: warn when the
    /// mean of `f0` leaves [0.2, 5.0].
    pub fn solvability_warning(&self) -> Option<String> {
        let mean = self.f0.mean();
        if !(0.2..=5.0).contains(&mean) {
            Some(format!(
                "mean prescribed volume change {mean:.3} is far from 1; \
                 the targets may not be attainable on a fixed domain"
            ))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOptions {
    /// Maximum accepted gradient steps.
    pub max_iters: usize,
    /// Initial step length in voxels (the descent direction is normalized
    /// to unit max-component).
    pub step: f64,
    /// Gradient-smoothing sigma in voxels; 0 disables the preconditioner.
    pub sigma: f64,
    /// Weight on the curl residual relative to the determinant residual.
    pub curl_weight: f64,
    /// Stop when the functional drops below this value.
    pub tol_abs: f64,
    /// Stop when the relative decrease over `tol_window` accepted steps
    /// falls below this value.
    pub tol_rel: f64,
    pub tol_window: usize,
    /// Step halvings to try before giving up on an iteration.
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step: 0.5,
            sigma: 1.0,
            curl_weight: 1.0,
            tol_abs: 1e-8,
            tol_rel: 1e-6,
            tol_window: 10,
            max_halvings: 20,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.step <= 0.0 || self.curl_weight < 0.0 || self.tol_window == 0
        {
            return Err(Error::InvalidArgument("solve options out of range".into()));
        }
        Ok(())
    }
}

/// Outcome of a solve: accepted-step history of the functional value.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_value: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Functional value at the transformation `phi` (see module docs).
pub fn functional_value(phi: &VectorField, monitor: &MonitorPair, curl_weight: f64) -> Result<f64> {
    phi.ensure_kind(FieldKind::Transformation)?;
    phi.grid().ensure_compatible(monitor.grid(), "functional")?;
    let jd = crate::diffgeo::jacobian_determinant(phi)?;
    let cv = crate::diffgeo::curl(phi)?;
    let n = phi.grid().len();
    let f0 = monitor.f0.data();
    let sum = par::sum_indexed(n, |i| {
        let rj = jd.data()[i] - f0[i];
        let c = cv.raw_at(i);
        let g = monitor.g0.raw_at(i);
        let (d0, d1, d2) = (c[0] - g[0], c[1] - g[1], c[2] - g[2]);
        0.5 * (rj * rj + curl_weight * (d0 * d0 + d1 * d1 + d2 * d2))
    });
    Ok(sum / n as f64)
}

/// Gradient of [`functional_value`] with respect to the displacement
/// offsets of `phi`, zeroed on the boundary shell (Dirichlet). This is the
/// raw, unpreconditioned gradient; the finite-difference check in the test
/// suite validates it directly.
pub fn functional_gradient(
    phi: &VectorField,
    monitor: &MonitorPair,
    curl_weight: f64,
) -> Result<Vec<[f64; 3]>> {
    phi.ensure_kind(FieldKind::Transformation)?;
    phi.grid().ensure_compatible(monitor.grid(), "functional gradient")?;
    let grid = *phi.grid();
    let n = grid.len();
    let inv_n = 1.0 / n as f64;

    // Nine partials of the offsets; identity adds one on the diagonal.
    let partials = gradient3(&grid, |idx| phi.raw_at(idx));
    let m = |a: usize, b: usize, idx: usize| {
        partials[a][b][idx] + if a == b { 1.0 } else { 0.0 }
    };

    // Determinant residual r = J - f0.
    let f0 = monitor.f0.data();
    let mut resid = vec![0.0; n];
    par::fill_indexed(&mut resid, |idx| {
        m(0, 0, idx) * (m(1, 1, idx) * m(2, 2, idx) - m(1, 2, idx) * m(2, 1, idx))
            - m(0, 1, idx) * (m(1, 0, idx) * m(2, 2, idx) - m(1, 2, idx) * m(2, 0, idx))
            + m(0, 2, idx) * (m(1, 0, idx) * m(2, 1, idx) - m(1, 1, idx) * m(2, 0, idx))
            - f0[idx]
    });

    // Curl residual s = curl - g0, weighted.
    let mut s = vec![[0.0; 3]; n];
    par::fill_indexed(&mut s, |idx| {
        let g = monitor.g0.raw_at(idx);
        [
            curl_weight * (partials[2][1][idx] - partials[1][2][idx] - g[0]) * inv_n,
            curl_weight * (partials[0][2][idx] - partials[2][0][idx] - g[1]) * inv_n,
            curl_weight * (partials[1][0][idx] - partials[0][1][idx] - g[2]) * inv_n,
        ]
    });

    // dE/dM_ab = (r/n) * cof(M)_ab, scattered back through the stencil
    // adjoints; the curl terms contribute with their signs from the curl
    // definition c = (M32-M23, M13-M31, M21-M12).
    let mut weights: [[Vec<f64>; 3]; 3] =
        std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; n]));
    for (a, row) in weights.iter_mut().enumerate() {
        for (b, buf) in row.iter_mut().enumerate() {
            par::fill_indexed(buf, |idx| {
                let (r, c) = ((a + 1) % 3, (a + 2) % 3);
                let (s1, s2) = ((b + 1) % 3, (b + 2) % 3);
                // Cofactor of entry (a, b) of M.
                let cof = m(r, s1, idx) * m(c, s2, idx) - m(r, s2, idx) * m(c, s1, idx);
                let mut w = resid[idx] * inv_n * cof;
                // curl component using M_ab: c0 uses +M21/-M12 etc.
                match (a, b) {
                    (2, 1) => w += s[idx][0],
                    (1, 2) => w -= s[idx][0],
                    (0, 2) => w += s[idx][1],
                    (2, 0) => w -= s[idx][1],
                    (1, 0) => w += s[idx][2],
                    (0, 1) => w -= s[idx][2],
                    _ => {}
                }
                w
            });
        }
    }

    let mut grad = vec![[0.0; 3]; n];
    let mut adj = vec![0.0; n];
    for a in 0..3 {
        for (b, axis) in AXES.iter().enumerate() {
            let w = &weights[a][b];
            diff_adjoint(&grid, *axis, |idx| w[idx], &mut adj);
            for (g, &v) in grad.iter_mut().zip(adj.iter()) {
                g[a] += v;
            }
        }
    }
    zero_boundary(&grid, &mut grad);
    Ok(grad)
}

/// Zero the offsets on the outer one-voxel shell (Dirichlet boundary).
fn zero_boundary(grid: &Grid3, data: &mut [[f64; 3]]) {
    let (nx, ny, nz) = grid.dims();
    let face = |data: &mut [[f64; 3]], idx: usize| data[idx] = [0.0; 3];
    for k in 0..nz {
        for j in 0..ny {
            if k == 0 || k == nz - 1 || j == 0 || j == ny - 1 {
                for i in 0..nx {
                    face(data, grid.index(i, j, k));
                }
            } else {
                face(data, grid.index(0, j, k));
                face(data, grid.index(nx - 1, j, k));
            }
        }
    }
}

/// Reconstruct a transformation whose Jacobian determinant and curl match
/// the monitor pair; returns the best iterate and the descent history.
pub fn reconstruct(monitor: &MonitorPair, opts: &SolveOptions) -> Result<(VectorField, SolveReport)> {
    opts.validate()?;
    let grid = *monitor.grid();
    let n = grid.len();

    let mut phi = VectorField::identity(grid);
    let mut value = functional_value(&phi, monitor, opts.curl_weight)?;
    let mut history = vec![value];

    if value <= opts.tol_abs {
        return Ok((
            phi,
            SolveReport { iterations: 0, final_value: value, history, converged: true },
        ));
    }

    let mut converged = false;
    let mut iterations = 0;
    // Accepted step length carries over (doubled, capped) so the search
    // doesn't re-walk down from the full step every iteration.
    let mut tau_start = opts.step;
    for _ in 0..opts.max_iters {
        let mut dir = functional_gradient(&phi, monitor, opts.curl_weight)?;
        if opts.sigma > 0.0 {
            smooth::smooth_components(&grid, opts.sigma, &mut dir);
            zero_boundary(&grid, &mut dir);
        }
        let ginf = par::max_indexed(n, |i| {
            let v = dir[i];
            v[0].abs().max(v[1].abs()).max(v[2].abs())
        });
        if ginf == 0.0 {
            converged = value <= opts.tol_abs;
            break;
        }
        let inv = 1.0 / ginf;

        let mut tau = tau_start;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = vec![[0.0; 3]; n];
            par::fill_indexed(&mut trial, |i| {
                let u = phi.raw_at(i);
                let d = dir[i];
                [u[0] - tau * inv * d[0], u[1] - tau * inv * d[1], u[2] - tau * inv * d[2]]
            });
            let trial_phi = VectorField::from_raw(grid, FieldKind::Transformation, trial)?;
            let trial_value = functional_value(&trial_phi, monitor, opts.curl_weight)?;
            if trial_value < value {
                phi = trial_phi;
                value = trial_value;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            break; // stuck at step resolution
        }
        tau_start = (tau * 2.0).min(opts.step);
        iterations += 1;
        history.push(value);

        if value <= opts.tol_abs {
            converged = true;
            break;
        }
        if history.len() > opts.tol_window {
            let prev = history[history.len() - 1 - opts.tol_window];
            if (prev - value) / prev.max(f64::MIN_POSITIVE) < opts.tol_rel {
                converged = true;
                break;
            }
        }
    }

    Ok((
        phi,
        SolveReport { iterations, final_value: value, history, converged },
    ))
}
