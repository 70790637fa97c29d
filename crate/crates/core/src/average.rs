//! Averaging a set of transformations through their differential-geometric
//! content: the per-voxel means of the Jacobian determinants and curls
//! become the prescribed targets of a variational reconstruction, and the
//! reconstructed transformation is the average.
//!
//! Pure translations have the same determinant and curl as the identity, so
//! translation content is invisible to this average by construction; inputs
//! should be roughly centered beforehand.

use crate::diffgeo;
use crate::error::{Error, Result};
use crate::fields::{FieldKind, ScalarKind, ScalarVolume, VectorField};
use crate::par;
use crate::varsolve::{self, MonitorPair, SolveOptions, SolveReport};

/// Per-voxel contributions are sorted by value before summation, so the
/// result is bit-identical under any input permutation.
fn mean_sorted(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let s: f64 = values.iter().sum();
    s / values.len() as f64
}

/// Mean Jacobian determinant and mean curl over the input transformations.
pub fn average_monitor(phis: &[VectorField]) -> Result<MonitorPair> {
    if phis.is_empty() {
        return Err(Error::EmptyInput("average over zero transformations"));
    }
    let grid = *phis[0].grid();
    for phi in phis {
        grid.ensure_compatible(phi.grid(), "average_monitor")?;
        phi.ensure_kind(FieldKind::Transformation)?;
    }
    let jds: Vec<ScalarVolume> = phis
        .iter()
        .map(diffgeo::jacobian_determinant)
        .collect::<Result<_>>()?;
    let curls: Vec<VectorField> = phis.iter().map(diffgeo::curl).collect::<Result<_>>()?;

    let n = grid.len();
    let count = phis.len();
    let mut f0 = vec![0.0; n];
    par::fill_indexed(&mut f0, |idx| {
        let mut vals: Vec<f64> = jds.iter().map(|jd| jd.data()[idx]).collect();
        mean_sorted(&mut vals)
    });
    let mut g0 = vec![[0.0; 3]; n];
    par::fill_indexed(&mut g0, |idx| {
        let mut out = [0.0; 3];
        let mut vals = vec![0.0; count];
        for (c, o) in out.iter_mut().enumerate() {
            for (v, cv) in vals.iter_mut().zip(&curls) {
                *v = cv.raw_at(idx)[c];
            }
            *o = mean_sorted(&mut vals);
        }
        out
    });

    MonitorPair::new(
        ScalarVolume::new(grid, ScalarKind::Jacobian, f0)?,
        VectorField::from_raw(grid, FieldKind::Curl, g0)?,
    )
}

/// The transformation whose determinant and curl equal the averaged
/// monitors, obtained by variational reconstruction.
pub fn average_transformations(
    phis: &[VectorField],
    opts: &SolveOptions,
) -> Result<(VectorField, SolveReport)> {
    let monitor = average_monitor(phis)?;
    varsolve::reconstruct(&monitor, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid3;
    use crate::svf;
    use crate::synth;

    #[test]
    fn empty_list_is_an_error() {
        assert!(average_monitor(&[]).is_err());
    }

    #[test]
    fn identical_inputs_reproduce_their_monitors() {
        let g = Grid3::cube(12).unwrap();
        let z = synth::smooth_velocity_default(g, 1.0, 6).unwrap();
        let phi = svf::exponentiate(&z, svf::DEFAULT_STEPS).unwrap();
        let single = average_monitor(std::slice::from_ref(&phi)).unwrap();
        let triple = average_monitor(&[phi.clone(), phi.clone(), phi.clone()]).unwrap();
        for (a, b) in single.f0().data().iter().zip(triple.f0().data()) {
            assert!((a - b).abs() < 1e-14);
        }
        let jd = diffgeo::jacobian_determinant(&phi).unwrap();
        for (a, b) in single.f0().data().iter().zip(jd.data()) {
            assert_eq!(a, b); // mean of one value is that value
        }
    }

    #[test]
    fn identity_inputs_average_to_identity_with_zero_iterations() {
        let g = Grid3::cube(10).unwrap();
        let ids = vec![VectorField::identity(g); 3];
        let (avg, report) = average_transformations(&ids, &SolveOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(avg, VectorField::identity(g));
    }

    #[test]
    fn linear_scalings_average_their_determinants() {
        // Two linear maps with constant JD 1.0 and 3.0 and zero curl:
        // the averaged determinant target is 2.0 everywhere.
        let g = Grid3::cube(8).unwrap();
        let id = VectorField::identity(g);
        let s = 3f64.cbrt();
        let scaled = VectorField::from_fn_raw(g, FieldKind::Transformation, |i, j, k| {
            [(s - 1.0) * i as f64, (s - 1.0) * j as f64, (s - 1.0) * k as f64]
        });
        let monitor = average_monitor(&[id, scaled]).unwrap();
        // Interior voxels: both determinants are exact on linear fields.
        for k in 1..7 {
            for j in 1..7 {
                for i in 1..7 {
                    assert!((monitor.f0().at(i, j, k) - 2.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn permutation_invariance_is_bit_exact() {
        let g = Grid3::cube(10).unwrap();
        let mut phis = Vec::new();
        for seed in 0..4 {
            let z = synth::smooth_velocity_default(g, 1.2, seed).unwrap();
            phis.push(svf::exponentiate(&z, 6).unwrap());
        }
        let opts = SolveOptions { max_iters: 25, ..Default::default() };
        let (a, _) = average_transformations(&phis, &opts).unwrap();
        phis.reverse();
        let (b, _) = average_transformations(&phis, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn translations_average_to_identity() {
        // Translations share the identity's monitors, so the average cannot
        // see them; with zero-residual targets the solver returns identity.
        let g = Grid3::cube(8).unwrap();
        let ta = synth::translation_field(g, [2.0, 0.0, 0.0]).unwrap();
        let tb = synth::translation_field(g, [-2.0, 1.0, 0.0]).unwrap();
        let (avg, report) = average_transformations(&[ta, tb], &SolveOptions::default()).unwrap();
        assert_eq!(avg, VectorField::identity(g));
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn monitor_mean_is_linear_in_inputs() {
        let g = Grid3::cube(9).unwrap();
        let mut phis = Vec::new();
        for seed in 10..13 {
            let z = synth::smooth_velocity_default(g, 0.8, seed).unwrap();
            phis.push(svf::exponentiate(&z, 6).unwrap());
        }
        let monitor = average_monitor(&phis).unwrap();
        let mean_of_means: f64 = phis
            .iter()
            .map(|p| diffgeo::jacobian_determinant(p).unwrap().mean())
            .sum::<f64>()
            / phis.len() as f64;
        assert!((monitor.f0().mean() - mean_of_means).abs() < 1e-12);
    }

    #[test]
    fn averaging_the_average_is_stable() {
        // The average's own monitors are attainable, so re-averaging the
        // single averaged field reproduces them within solver tolerance.
        let g = Grid3::cube(12).unwrap();
        let mut phis = Vec::new();
        for seed in 40..42u64 {
            let z = synth::smooth_velocity_default(g, 1.0, seed).unwrap();
            phis.push(svf::exponentiate(&z, svf::DEFAULT_STEPS).unwrap());
        }
        let opts = SolveOptions { max_iters: 300, ..Default::default() };
        let (avg, _) = average_transformations(&phis, &opts).unwrap();
        let (again, _) = average_transformations(std::slice::from_ref(&avg), &opts).unwrap();
        let jd_a = diffgeo::jacobian_determinant(&avg).unwrap();
        let jd_b = diffgeo::jacobian_determinant(&again).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in jd_b.data().iter().zip(jd_a.data()) {
            num += (a - b) * (a - b);
            den += b * b;
        }
        let rel = (num / den).sqrt();
        assert!(rel <= 5e-2, "re-averaged determinant residual {rel}");
    }
}
