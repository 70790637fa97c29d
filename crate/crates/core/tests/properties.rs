//! Property tests for the structural invariants of the core types.

use proptest::prelude::*;

use diffeo_core::fields::{
    compose, sample_trilinear, warp, FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField,
};
use diffeo_core::metrics;
use diffeo_core::nifti;

fn small_dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..6, 2usize..6, 2usize..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trilinear_is_exact_on_affine_volumes(
        (nx, ny, nz) in small_dims(),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -2.0f64..2.0,
        d in -5.0f64..5.0,
        px in 0.0f64..1.0,
        py in 0.0f64..1.0,
        pz in 0.0f64..1.0,
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        let vol = ScalarVolume::from_fn(g, ScalarKind::Intensity, |i, j, k| {
            a * i as f64 + b * j as f64 + c * k as f64 + d
        });
        // Interior point (strictly inside the lattice hull).
        let p = [
            px * (nx - 1) as f64,
            py * (ny - 1) as f64,
            pz * (nz - 1) as f64,
        ];
        let got = sample_trilinear(&vol, p).unwrap();
        let want = a * p[0] + b * p[1] + c * p[2] + d;
        prop_assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn kind_conversion_roundtrips_bitwise(
        (nx, ny, nz) in small_dims(),
        seed in any::<u64>(),
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<[f64; 3]> = (0..g.len())
            .map(|_| {
                [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 1e-13 * rng.gen_range(-1.0..1.0)]
            })
            .collect();
        let field = VectorField::from_raw(g, FieldKind::Transformation, data).unwrap();
        let back = field.clone().into_displacement().unwrap().into_transformation().unwrap();
        prop_assert_eq!(field, back);
    }

    #[test]
    fn warp_by_identity_is_bitwise_for_all_kinds(
        (nx, ny, nz) in small_dims(),
        seed in any::<u64>(),
        kind_pick in 0usize..3,
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let kind = [ScalarKind::Intensity, ScalarKind::Jacobian, ScalarKind::Label][kind_pick];
        let data: Vec<f64> = (0..g.len())
            .map(|_| {
                if kind == ScalarKind::Label {
                    rng.gen_range(0..5) as f64
                } else {
                    rng.gen_range(-10.0..10.0)
                }
            })
            .collect();
        let vol = ScalarVolume::new(g, kind, data).unwrap();
        let warped = warp(&vol, &VectorField::identity(g)).unwrap();
        prop_assert_eq!(vol, warped);
    }

    #[test]
    fn compose_with_identity_is_right_identity(
        (nx, ny, nz) in small_dims(),
        seed in any::<u64>(),
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<[f64; 3]> = (0..g.len())
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let phi = VectorField::from_raw(g, FieldKind::Transformation, data).unwrap();
        let composed = compose(&phi, &VectorField::identity(g)).unwrap();
        prop_assert_eq!(phi, composed);
    }

    #[test]
    fn dice_is_symmetric_and_bounded(
        (nx, ny, nz) in small_dims(),
        seed in any::<u64>(),
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |_: ()| {
            ScalarVolume::new(
                g,
                ScalarKind::Label,
                (0..g.len()).map(|_| rng.gen_range(0..3) as f64).collect(),
            )
            .unwrap()
        };
        let a = gen(());
        let b = gen(());
        let ab = metrics::dice(&a, &b, 1).unwrap();
        let ba = metrics::dice(&b, &a, 1).unwrap();
        prop_assert_eq!(ab.score, ba.score);
        prop_assert!((0.0..=1.0).contains(&ab.score));
        let self_dice = metrics::dice(&a, &a, 1).unwrap();
        prop_assert_eq!(self_dice.score, 1.0);
    }

    #[test]
    fn ssd_is_nonnegative_and_zero_iff_equal(
        (nx, ny, nz) in small_dims(),
        seed in any::<u64>(),
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = ScalarVolume::new(
            g,
            ScalarKind::Intensity,
            (0..g.len()).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        )
        .unwrap();
        let mut b = a.clone();
        prop_assert_eq!(metrics::ssd_value(&a, &b).unwrap(), 0.0);
        b.data_mut()[0] += 1.0;
        prop_assert!(metrics::ssd_value(&a, &b).unwrap() > 0.0);
    }
}

proptest! {
    // File round trips hit the disk; keep the case count small.
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nifti_volume_roundtrip_is_bit_exact_in_f64(
        (nx, ny, nz) in small_dims(),
        seed in any::<u64>(),
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vol = ScalarVolume::new(
            g,
            ScalarKind::Intensity,
            (0..g.len()).map(|_| rng.gen_range(-1e6..1e6)).collect(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.nii");
        nifti::write_volume_with(
            &vol,
            &path,
            &nifti::WriteOptions { float64: true, orientation_from: None },
        )
        .unwrap();
        let back = nifti::read_volume(&path).unwrap();
        prop_assert_eq!(vol.data(), back.data());
    }

    #[test]
    fn nifti_field_roundtrip_is_bit_exact(
        (nx, ny, nz) in small_dims(),
        seed in any::<u64>(),
    ) {
        let g = Grid3::new(nx, ny, nz).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<[f64; 3]> = (0..g.len())
            .map(|_| [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
            .collect();
        let field = VectorField::from_raw(g, FieldKind::Transformation, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop_field.nii");
        nifti::write_field(&field, &path).unwrap();
        let back = nifti::read_field(&path).unwrap();
        prop_assert_eq!(field, back);
    }
}
