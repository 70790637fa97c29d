//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them). Criteria are serialized on a lock
//! so the stated runtime budgets see the whole machine.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use diffeo_core::diffgeo;
use diffeo_core::fields::{
    compose, warp, FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField,
};
use diffeo_core::metrics;
use diffeo_core::nifti;
use diffeo_core::register::{register, RegistrationOptions};
use diffeo_core::svf;
use diffeo_core::synth;
use diffeo_core::varsolve::{
    functional_gradient, functional_value, reconstruct, MonitorPair, SolveOptions,
};

static LOCK: Mutex<()> = Mutex::new(());

fn criterion(number: u32, name: &str, budget: Duration, body: impl FnOnce() -> Result<(), String>) {
    let _guard = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    match outcome {
        Ok(()) if elapsed <= budget => {
            println!("ACCEPTANCE {number:02} {name}: PASS ({elapsed:.2?})");
        }
        Ok(()) => {
            println!(
                "ACCEPTANCE {number:02} {name}: FAIL (over budget: {elapsed:.2?} > {budget:.2?})"
            );
            panic!("criterion {number} exceeded its runtime budget");
        }
        Err(msg) => {
            println!("ACCEPTANCE {number:02} {name}: FAIL ({msg})");
            panic!("criterion {number} failed: {msg}");
        }
    }
}

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn rel_l2(got: &[f64], want: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, w) in got.iter().zip(want) {
        num += (g - w) * (g - w);
        den += w * w;
    }
    (num / den).sqrt()
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_analytic_differential_geometry() {
    criterion(1, "analytic affine determinant and curl", Duration::from_secs(1), || {
        let g = Grid3::cube(32).unwrap();
        // phi(p) = A p + b with diagonal (1.2, 0.9, 1.1) and skew
        // entries a21 = 0.1, a12 = -0.1.
        let a = [[1.2, -0.1, 0.0], [0.1, 0.9, 0.0], [0.0, 0.0, 1.1]];
        let b = [0.4, -0.2, 0.7];
        let det_a = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        let curl_want = [
            a[2][1] - a[1][2],
            a[0][2] - a[2][0],
            a[1][0] - a[0][1],
        ];

        let phi = VectorField::from_fn_raw(g, FieldKind::Displacement, |i, j, k| {
            let p = [i as f64, j as f64, k as f64];
            [
                (a[0][0] - 1.0) * p[0] + a[0][1] * p[1] + a[0][2] * p[2] + b[0],
                a[1][0] * p[0] + (a[1][1] - 1.0) * p[1] + a[1][2] * p[2] + b[1],
                a[2][0] * p[0] + a[2][1] * p[1] + (a[2][2] - 1.0) * p[2] + b[2],
            ]
        })
        .into_transformation()
        .map_err(|e| e.to_string())?;

        let jd = diffgeo::jacobian_determinant(&phi).map_err(|e| e.to_string())?;
        let cv = diffgeo::curl(&phi).map_err(|e| e.to_string())?;
        for k in 1..31 {
            for j in 1..31 {
                for i in 1..31 {
                    let dj = (jd.at(i, j, k) - det_a).abs();
                    ensure(dj <= 1e-10, format!("JD off by {dj} at ({i},{j},{k})"))?;
                    let c = cv.value_at(i, j, k);
                    for (got, want) in c.iter().zip(&curl_want) {
                        ensure((got - want).abs() <= 1e-10, format!("curl off at ({i},{j},{k})"))?;
                    }
                }
            }
        }
        Ok(())
    });
}

// Independent oracle: explicit 3x3 matrix per voxel, own stencils, cofactor
// expansion along the first row. Deliberately shares no code with the
// library implementation.
fn oracle_jd_curl(
    offsets: &[[f64; 3]],
    n: usize,
) -> (Vec<f64>, Vec<[f64; 3]>) {
    let idx = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let comp = |a: usize, i: usize, j: usize, k: usize| {
        let u = offsets[idx(i, j, k)][a];
        u + match a {
            0 => i as f64,
            1 => j as f64,
            _ => k as f64,
        }
    };
    let mut jd = vec![0.0; n * n * n];
    let mut curl = vec![[0.0; 3]; n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                // d phi_a / d axis with one-sided differences on faces.
                let deriv = |a: usize, axis: usize| -> f64 {
                    let c = [i, j, k][axis];
                    let at = |c2: usize| match axis {
                        0 => comp(a, c2, j, k),
                        1 => comp(a, i, c2, k),
                        _ => comp(a, i, j, c2),
                    };
                    if c == 0 {
                        at(1) - at(0)
                    } else if c == n - 1 {
                        at(n - 1) - at(n - 2)
                    } else {
                        (at(c + 1) - at(c - 1)) / 2.0
                    }
                };
                let mut m = [[0.0; 3]; 3];
                for (a, row) in m.iter_mut().enumerate() {
                    for (axis, entry) in row.iter_mut().enumerate() {
                        *entry = deriv(a, axis);
                    }
                }
                // Cofactor expansion along the first row.
                let minor = |r0: usize, r1: usize, c0: usize, c1: usize| {
                    m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
                };
                jd[idx(i, j, k)] =
                    m[0][0] * minor(1, 2, 1, 2) - m[0][1] * minor(1, 2, 0, 2)
                        + m[0][2] * minor(1, 2, 0, 1);
                curl[idx(i, j, k)] =
                    [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]];
            }
        }
    }
    (jd, curl)
}

#[test]
fn criterion_02_geometry_matches_independent_oracle() {
    criterion(2, "determinant/curl vs cofactor oracle on 100 fields", Duration::from_secs(5), || {
        let n = 8;
        let g = Grid3::cube(n).unwrap();
        for seed in 0..100u64 {
            let z = synth::smooth_velocity(g, 1.0, 1.5, 0.0, seed).map_err(|e| e.to_string())?;
            let phi = z
                .retag(FieldKind::Displacement)
                .into_transformation()
                .map_err(|e| e.to_string())?;
            let jd = diffgeo::jacobian_determinant(&phi).map_err(|e| e.to_string())?;
            let cv = diffgeo::curl(&phi).map_err(|e| e.to_string())?;
            let (jd_want, cv_want) = oracle_jd_curl(phi.raw(), n);
            for (idx, (got, want)) in jd.data().iter().zip(&jd_want).enumerate() {
                ensure(
                    (got - want).abs() <= 1e-12,
                    format!("seed {seed}: JD mismatch {got} vs {want} at {idx}"),
                )?;
            }
            for (idx, (got, want)) in cv.raw().iter().zip(&cv_want).enumerate() {
                for c in 0..3 {
                    ensure(
                        (got[c] - want[c]).abs() <= 1e-12,
                        format!("seed {seed}: curl mismatch at {idx}"),
                    )?;
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_03_velocity_exponential() {
    criterion(3, "velocity exponential: identity, inverse, positivity", Duration::from_secs(10), || {
        let g = Grid3::cube(32).unwrap();

        // exp(0) is the identity exactly.
        let zero = VectorField::zeros(g, FieldKind::Velocity);
        let id = svf::exponentiate(&zero, svf::DEFAULT_STEPS).map_err(|e| e.to_string())?;
        ensure(id == VectorField::identity(g), "exp(0) != identity".into())?;

        for (seed, amp) in [(40u64, 0.5f64), (41, 1.0), (42, 2.0)] {
            let z = synth::smooth_velocity_default(g, amp, seed).map_err(|e| e.to_string())?;
            let fwd = svf::exponentiate(&z, svf::DEFAULT_STEPS).map_err(|e| e.to_string())?;
            let inv = svf::exponentiate_inverse(&z, svf::DEFAULT_STEPS).map_err(|e| e.to_string())?;
            let round = compose(&fwd, &inv).map_err(|e| e.to_string())?;

            // Interior excludes a 3-voxel shell (above the 2-voxel maximum
            // displacement, where clamped sampling can contaminate).
            let mut max_err = 0.0f64;
            for k in 3..29 {
                for j in 3..29 {
                    for i in 3..29 {
                        let u = round.offset_at(i, j, k);
                        max_err = max_err.max(u[0].abs().max(u[1].abs()).max(u[2].abs()));
                    }
                }
            }
            ensure(
                max_err <= 0.1,
                format!("amp {amp}: inverse round-trip interior error {max_err}"),
            )?;

            for phi in [&fwd, &inv] {
                let jd = diffgeo::jacobian_determinant(phi).map_err(|e| e.to_string())?;
                let frac = diffgeo::negative_jacobian_fraction(&jd, None).map_err(|e| e.to_string())?;
                ensure(frac == 0.0, format!("amp {amp}: negative-determinant fraction {frac}"))?;
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_04_reconstruction_roundtrip() {
    criterion(4, "variational round-trip at 32^3", Duration::from_secs(180), || {
        let g = Grid3::cube(32).unwrap();
        let z = synth::smooth_velocity_default(g, 1.5, 4).map_err(|e| e.to_string())?;
        let target = svf::exponentiate(&z, svf::DEFAULT_STEPS).map_err(|e| e.to_string())?;
        let monitor = MonitorPair::new(
            diffgeo::jacobian_determinant(&target).map_err(|e| e.to_string())?,
            diffgeo::curl(&target).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;

        let opts = SolveOptions { max_iters: 300, ..Default::default() };
        let (phi, report) = reconstruct(&monitor, &opts).map_err(|e| e.to_string())?;

        for w in report.history.windows(2) {
            ensure(w[1] <= w[0], format!("history increased: {} -> {}", w[0], w[1]))?;
        }

        let jd = diffgeo::jacobian_determinant(&phi).map_err(|e| e.to_string())?;
        let cv = diffgeo::curl(&phi).map_err(|e| e.to_string())?;
        let rj = rel_l2(jd.data(), monitor.f0().data());
        ensure(rj <= 5e-2, format!("determinant residual {rj}"))?;
        let got: Vec<f64> = cv.raw().iter().flatten().copied().collect();
        let want: Vec<f64> = monitor.g0().raw().iter().flatten().copied().collect();
        let rc = rel_l2(&got, &want);
        ensure(rc <= 5e-2, format!("curl residual {rc}"))?;
        Ok(())
    });
}

#[test]
fn criterion_05_functional_gradient_check() {
    criterion(5, "functional gradient vs finite differences", Duration::from_secs(30), || {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        let g = Grid3::cube(12).unwrap();
        let n = g.len();

        let z = synth::smooth_velocity_default(g, 1.0, 50).map_err(|e| e.to_string())?;
        let target = svf::exponentiate(&z, svf::DEFAULT_STEPS).map_err(|e| e.to_string())?;
        let monitor = MonitorPair::new(
            diffgeo::jacobian_determinant(&target).map_err(|e| e.to_string())?,
            diffgeo::curl(&target).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;

        let interior_random = |scale: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut buf = vec![[0.0; 3]; n];
            for (idx, v) in buf.iter_mut().enumerate() {
                let (i, j, k) = g.coords(idx);
                if !g.is_boundary(i, j, k) {
                    for c in v.iter_mut() {
                        *c = scale * rng.gen_range(-1.0..1.0);
                    }
                }
            }
            buf
        };

        let u = interior_random(0.25, &mut rng);
        let phi = VectorField::from_raw(g, FieldKind::Transformation, u.clone())
            .map_err(|e| e.to_string())?;
        let grad = functional_gradient(&phi, &monitor, 1.0).map_err(|e| e.to_string())?;

        let eps = 1e-6;
        for trial in 0..20 {
            let dir = interior_random(1.0, &mut rng);
            let analytic: f64 = grad
                .iter()
                .zip(&dir)
                .map(|(a, d)| a[0] * d[0] + a[1] * d[1] + a[2] * d[2])
                .sum();
            let eval = |t: f64| -> Result<f64, String> {
                let shifted: Vec<[f64; 3]> = u
                    .iter()
                    .zip(&dir)
                    .map(|(a, d)| [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]])
                    .collect();
                let p = VectorField::from_raw(g, FieldKind::Transformation, shifted)
                    .map_err(|e| e.to_string())?;
                functional_value(&p, &monitor, 1.0).map_err(|e| e.to_string())
            };
            let numeric = (eval(eps)? - eval(-eps)?) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / numeric.abs().max(1e-12);
            ensure(
                rel <= 1e-4,
                format!("direction {trial}: relative error {rel} ({analytic} vs {numeric})"),
            )?;
        }
        Ok(())
    });
}

#[test]
fn criterion_06_registration_recovery() {
    criterion(6, "registration: self, known warp, translation", Duration::from_secs(300), || {
        // Self-registration is a fixed point.
        let g32 = Grid3::cube(32).unwrap();
        let vol = synth::phantom(g32, 7);
        let (z, _, report) =
            register(&vol, &vol, &RegistrationOptions::default()).map_err(|e| e.to_string())?;
        ensure(z.max_abs_component() <= 1e-3, "self-registration velocity too large".into())?;
        ensure(report.final_ssd <= report.initial_ssd, "self-registration increased ssd".into())?;

        // Known-warp recovery on 64^3.
        let g = Grid3::cube(64).unwrap();
        let moving = synth::phantom(g, 11);
        let z_true = synth::smooth_velocity_default(g, 2.0, 12).map_err(|e| e.to_string())?;
        let phi_true = svf::exponentiate(&z_true, svf::DEFAULT_STEPS).map_err(|e| e.to_string())?;
        let fixed = warp(&moving, &phi_true).map_err(|e| e.to_string())?;
        let opts = RegistrationOptions { iters: 60, ..Default::default() };
        let (_, phi, report) = register(&moving, &fixed, &opts).map_err(|e| e.to_string())?;
        ensure(
            report.final_ssd <= 0.1 * report.initial_ssd,
            format!("ssd only reduced {:.4} -> {:.4}", report.initial_ssd, report.final_ssd),
        )?;
        let ball = synth::ball_mask(g, 16.0).map_err(|e| e.to_string())?;
        let target_ball = warp(&ball, &phi_true).map_err(|e| e.to_string())?;
        let moved_ball = warp(&ball, &phi).map_err(|e| e.to_string())?;
        let dice = metrics::dice(&moved_ball, &target_ball, 1).map_err(|e| e.to_string())?;
        ensure(dice.score >= 0.90, format!("ball overlap {:.4}", dice.score))?;
        let jd = diffgeo::jacobian_determinant(&phi).map_err(|e| e.to_string())?;
        let frac = diffgeo::negative_jacobian_fraction(&jd, None).map_err(|e| e.to_string())?;
        ensure(frac == 0.0, format!("negative-determinant fraction {frac}"))?;

        // Translation recovery: 3 voxels along x within 0.3.
        let moving_t = synth::phantom(g32, 5);
        let shift = synth::translation_field(g32, [3.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
        let fixed_t = warp(&moving_t, &shift).map_err(|e| e.to_string())?;
        let opts_t = RegistrationOptions {
            levels: 4,
            sigma: 3.0,
            iters: 150,
            step: 2.0,
            ..Default::default()
        };
        let (_, phi_t, _) = register(&moving_t, &fixed_t, &opts_t).map_err(|e| e.to_string())?;
        let mut mean = [0.0f64; 3];
        let mut count = 0.0;
        for k in 8..24 {
            for j in 8..24 {
                for i in 8..24 {
                    let u = phi_t.offset_at(i, j, k);
                    for (m, v) in mean.iter_mut().zip(u) {
                        *m += v;
                    }
                    count += 1.0;
                }
            }
        }
        for m in mean.iter_mut() {
            *m /= count;
        }
        ensure(
            (mean[0] - 3.0).abs() <= 0.3 && mean[1].abs() <= 0.3 && mean[2].abs() <= 0.3,
            format!("recovered translation {mean:?}"),
        )?;
        Ok(())
    });
}

#[test]
fn criterion_07_transformation_averaging() {
    criterion(7, "averaging: reproduction, identity, permutation", Duration::from_secs(60), || {
        use diffeo_core::average::{average_monitor, average_transformations};

        // N identical fields: the average's monitors match the member's
        // within the reconstruction tolerance.
        let g = Grid3::cube(16).unwrap();
        let z = synth::smooth_velocity_default(g, 1.2, 70).map_err(|e| e.to_string())?;
        let phi = svf::exponentiate(&z, svf::DEFAULT_STEPS).map_err(|e| e.to_string())?;
        let copies = vec![phi.clone(), phi.clone(), phi.clone()];
        let opts = SolveOptions { max_iters: 300, ..Default::default() };
        let (avg, _) = average_transformations(&copies, &opts).map_err(|e| e.to_string())?;
        let want = average_monitor(&copies).map_err(|e| e.to_string())?;
        let jd = diffgeo::jacobian_determinant(&avg).map_err(|e| e.to_string())?;
        let cv = diffgeo::curl(&avg).map_err(|e| e.to_string())?;
        let rj = rel_l2(jd.data(), want.f0().data());
        ensure(rj <= 5e-2, format!("determinant residual {rj}"))?;
        let got: Vec<f64> = cv.raw().iter().flatten().copied().collect();
        let target: Vec<f64> = want.g0().raw().iter().flatten().copied().collect();
        let rc = rel_l2(&got, &target);
        ensure(rc <= 5e-2, format!("curl residual {rc}"))?;

        // Identity inputs reproduce identity without iterating.
        let ids = vec![VectorField::identity(g); 4];
        let (avg_id, report) =
            average_transformations(&ids, &SolveOptions::default()).map_err(|e| e.to_string())?;
        ensure(report.iterations == 0, format!("identity took {} iterations", report.iterations))?;
        ensure(avg_id == VectorField::identity(g), "identity average not identity".into())?;

        // Bit-exact permutation invariance.
        let g10 = Grid3::cube(10).unwrap();
        let mut phis = Vec::new();
        for seed in 0..4u64 {
            let z = synth::smooth_velocity_default(g10, 1.2, seed).map_err(|e| e.to_string())?;
            phis.push(svf::exponentiate(&z, 6).map_err(|e| e.to_string())?);
        }
        let quick = SolveOptions { max_iters: 25, ..Default::default() };
        let (a, _) = average_transformations(&phis, &quick).map_err(|e| e.to_string())?;
        phis.reverse();
        phis.swap(1, 2);
        let (b, _) = average_transformations(&phis, &quick).map_err(|e| e.to_string())?;
        ensure(a == b, "permutation changed the result".into())?;
        Ok(())
    });
}

fn threshold_mask(vol: &ScalarVolume, level: f64) -> ScalarVolume {
    ScalarVolume::from_fn(*vol.grid(), ScalarKind::Label, |i, j, k| {
        if vol.at(i, j, k) > level {
            1.0
        } else {
            0.0
        }
    })
}

#[test]
fn criterion_08_atlas_construction() {
    criterion(8, "template construction on a synthetic cohort", Duration::from_secs(900), || {
        use diffeo_core::atlas::{build_atlas, AtlasOptions};

        let g = Grid3::cube(48).unwrap();
        // Blob anatomy with fine texture inside the envelope: registration
        // can only recover deformation where intensity gradients see it.
        let blobs = synth::phantom(g, 20);
        let tex = synth::textured(g, 2.0, 25);
        let base = ScalarVolume::from_fn(g, ScalarKind::Intensity, |i, j, k| {
            let b = blobs.at(i, j, k);
            if b > 0.02 {
                b + 0.3 * (tex.at(i, j, k) - 0.5)
            } else {
                0.0
            }
        });
        // Cohort velocities sum to zero so the cohort is centered on the base.
        let z1 = synth::smooth_velocity_default(g, 1.2, 21).map_err(|e| e.to_string())?;
        let z2 = synth::smooth_velocity_default(g, 1.2, 22).map_err(|e| e.to_string())?;
        let mut neg = vec![[0.0; 3]; g.len()];
        for (i, v) in neg.iter_mut().enumerate() {
            for (c, out) in v.iter_mut().enumerate() {
                *out = -(z1.raw()[i][c] + z2.raw()[i][c]);
            }
        }
        let z3 = VectorField::from_raw(g, FieldKind::Velocity, neg).map_err(|e| e.to_string())?;
        let subjects: Vec<ScalarVolume> = [&z1, &z2, &z3]
            .iter()
            .map(|z| {
                let phi = svf::exponentiate(z, svf::DEFAULT_STEPS)?;
                warp(&base, &phi)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;

        let opts = AtlasOptions {
            max_outer_iters: 5,
            registration: RegistrationOptions {
                levels: 3,
                iters: 50,
                lambda_reg: 0.05,
                ..Default::default()
            },
            solve: SolveOptions { max_iters: 200, ..Default::default() },
            ..Default::default()
        };
        let (atlas, report) = build_atlas(&subjects, &opts).map_err(|e| e.to_string())?;
        ensure(report.converged, format!("did not converge: deviations {:?}", report.deviations))?;
        ensure(
            report.iterations <= 5,
            format!("took {} outer iterations", report.iterations),
        )?;

        // Max deviation must not increase between outer iterations.
        let maxdev: Vec<f64> = report
            .deviations
            .iter()
            .map(|row| row.iter().cloned().fold(0.0f64, f64::max))
            .collect();
        for w in maxdev.windows(2) {
            ensure(
                w[1] <= w[0] + 1e-3,
                format!("deviation increased: {:?}", maxdev),
            )?;
        }

        // The template is at least as close to the base as every subject.
        let base_mask = threshold_mask(&base, 0.35);
        let atlas_dice = metrics::dice(&threshold_mask(&atlas, 0.35), &base_mask, 1)
            .map_err(|e| e.to_string())?
            .score;
        for (idx, subject) in subjects.iter().enumerate() {
            let d = metrics::dice(&threshold_mask(subject, 0.35), &base_mask, 1)
                .map_err(|e| e.to_string())?
                .score;
            ensure(
                atlas_dice >= d,
                format!("subject {idx} overlap {d:.4} beats template {atlas_dice:.4}"),
            )?;
        }
        Ok(())
    });
}

#[test]
fn criterion_09_overlap_metrics() {
    criterion(9, "overlap metrics vs brute-force counting", Duration::from_secs(5), || {
        use rand::{Rng, SeedableRng};

        // Half-overlapping cube is exactly one half.
        let g = Grid3::cube(6).unwrap();
        let cube = |x0: usize| {
            ScalarVolume::from_fn(g, ScalarKind::Label, move |i, j, k| {
                if (x0..x0 + 2).contains(&i) && (1..3).contains(&j) && (1..3).contains(&k) {
                    1.0
                } else {
                    0.0
                }
            })
        };
        let d = metrics::dice(&cube(1), &cube(2), 1).map_err(|e| e.to_string())?;
        ensure(d.score == 0.5, format!("half-overlap cube scored {}", d.score))?;

        // Random multi-label pairs match an independent counting oracle
        // exactly.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(90);
        let g8 = Grid3::cube(8).unwrap();
        for _ in 0..20 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                ScalarVolume::new(
                    g8,
                    ScalarKind::Label,
                    (0..g8.len()).map(|_| rng.gen_range(0..5) as f64).collect(),
                )
                .unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let md = metrics::dice_multilabel(&a, &b).map_err(|e| e.to_string())?;
            let mut oracle_sum = 0.0;
            let mut oracle_count = 0usize;
            for label in 1..5u32 {
                let (mut na, mut nb, mut ni) = (0usize, 0, 0);
                for idx in 0..g8.len() {
                    let va = a.data()[idx] as u32 == label;
                    let vb = b.data()[idx] as u32 == label;
                    na += va as usize;
                    nb += vb as usize;
                    ni += (va && vb) as usize;
                }
                if na + nb == 0 {
                    ensure(
                        !md.per_label.contains_key(&label),
                        format!("label {label} reported but absent"),
                    )?;
                    continue;
                }
                let want = 2.0 * ni as f64 / (na + nb) as f64;
                let got = md.per_label[&label];
                ensure(got == want, format!("label {label}: {got} vs {want}"))?;
                oracle_sum += want;
                oracle_count += 1;
            }
            let want_mean = oracle_sum / oracle_count as f64;
            ensure(md.mean == want_mean, format!("mean {} vs {}", md.mean, want_mean))?;
        }
        Ok(())
    });
}

#[test]
fn criterion_10_file_format_roundtrip_and_fuzz() {
    criterion(10, "file round-trips and malformed-header fuzzing", Duration::from_secs(10), || {
        use rand::{Rng, SeedableRng};
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;

        // Bit-exact float64 round trips.
        let g = Grid3::new(6, 5, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100);
        let vol = ScalarVolume::new(
            g,
            ScalarKind::Intensity,
            (0..g.len()).map(|_| rng.gen_range(-1e9..1e9)).collect(),
        )
        .unwrap();
        let vpath = dir.path().join("v.nii");
        nifti::write_volume_with(
            &vol,
            &vpath,
            &nifti::WriteOptions { float64: true, orientation_from: None },
        )
        .map_err(|e| e.to_string())?;
        let back = nifti::read_volume(&vpath).map_err(|e| e.to_string())?;
        ensure(back.data() == vol.data(), "volume payload not bit-identical".into())?;

        let field = VectorField::from_fn_raw(g, FieldKind::Transformation, |i, j, k| {
            [i as f64 * 0.31 + 1e-13, -(j as f64) * 0.17, (k as f64).exp()]
        });
        let fpath = dir.path().join("f.nii");
        nifti::write_field(&field, &fpath).map_err(|e| e.to_string())?;
        let fback = nifti::read_field(&fpath).map_err(|e| e.to_string())?;
        ensure(fback == field, "field round-trip not bit-identical".into())?;

        // 100 guaranteed-malformed headers: every one errors, none crash.
        let template = std::fs::read(&vpath).map_err(|e| e.to_string())?;
        for case in 0..100u64 {
            let mut bytes = template.clone();
            let fuzz_path = dir.path().join("fuzz.nii");
            match case % 8 {
                0 => {
                    // sizeof_hdr != 348
                    let bad = 1 + rng.gen_range(0..1000i32) * 7;
                    bytes[0..4].copy_from_slice(&bad.to_le_bytes());
                }
                1 => {
                    // garbage magic
                    let m = rng.gen_range(0u8..255);
                    bytes[344..348].copy_from_slice(&[m, m.wrapping_add(1), 0, 0]);
                }
                2 => {
                    // two-file magic
                    bytes[344..348].copy_from_slice(b"ni1\0");
                }
                3 => {
                    // unsupported datatype code
                    let bad: i16 = [3, 32, 128, 255, 512, 768, 1024, 2304][rng.gen_range(0..8)];
                    bytes[70..72].copy_from_slice(&bad.to_le_bytes());
                }
                4 => {
                    // bitpix inconsistent
                    bytes[72..74].copy_from_slice(&13i16.to_le_bytes());
                }
                5 => {
                    // dim[0] out of range either way
                    let bad: i16 = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(8..2000) };
                    bytes[40..42].copy_from_slice(&bad.to_le_bytes());
                }
                6 => {
                    // nonpositive axis
                    let axis = rng.gen_range(1..4usize);
                    bytes[40 + 2 * axis..42 + 2 * axis]
                        .copy_from_slice(&(-(rng.gen_range(0..5i16))).to_le_bytes());
                }
                _ => {
                    // truncate the payload
                    let keep = 352 + rng.gen_range(0..(bytes.len() - 353));
                    bytes.truncate(keep);
                }
            }
            std::fs::write(&fuzz_path, &bytes).map_err(|e| e.to_string())?;
            ensure(
                nifti::read_volume(&fuzz_path).is_err(),
                format!("fuzz case {case} was accepted"),
            )?;
        }
        Ok(())
    });
}
