use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Matrix3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcomp::fat_structure::Block;
use srcomp::sasakian_curvature::*;
use srcomp::scalar_models::sasakian_kappas;

fn random_v(rng: &mut ChaCha8Rng, r: f64) -> VerticalVector {
    VerticalVector::new(
        rng.random_range(-r..r),
        rng.random_range(-r..r),
        rng.random_range(-r..r),
    )
}

/// Valid but otherwise arbitrary inputs: `tr ABA = 12`, `tr UBU = 4d − 4`, `w` in both kernels.
fn random_inputs(d: usize, v: &VerticalVector, rng: &mut ChaCha8Rng) -> CurvatureInputs {
    let c = 4 * d - 3;
    let sym3 = |rng: &mut ChaCha8Rng| {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        (a + a.transpose()) * 0.5
    };
    let mut aba = sym3(rng);
    aba += Matrix3::identity() * ((12.0 - aba.trace()) / 3.0);
    let abdota = sym3(rng);
    let mut abu = DMatrix::from_fn(3, c, |_, _| rng.random_range(-1.0..1.0));
    abu.column_mut(c - 1).fill(0.0);
    let mut ubu = DMatrix::zeros(c, c);
    if c > 1 {
        let u = DMatrix::from_fn(c - 1, c - 1, |_, _| rng.random_range(-1.0..1.0));
        let mut u = (&u + u.transpose()) * 0.5;
        let shift = ((4 * d - 4) as f64 - u.trace()) / (c - 1) as f64;
        for i in 0..c - 1 {
            u[(i, i)] += shift;
        }
        ubu.view_mut((0, 0), (c - 1, c - 1)).copy_from(&u);
    }
    let mut w = DVector::zeros(c);
    w[c - 1] = 1.0;
    let rho_a = (v.skew() * aba * v.skew().transpose()).trace() - 6.0 * v.norm_squared();
    CurvatureInputs {
        d,
        aba,
        abdota,
        abu,
        ubu,
        w,
        rho_a,
    }
}

#[test]
fn skew_identities_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let v = random_v(&mut rng, 1.0);
        let m = v.skew();
        let s = v.norm_squared();
        let c = v.components();
        assert!((m * m * m + m * s).amax() < 1e-12);
        assert!((c * c.transpose() - m * m - Matrix3::identity() * s).amax() < 1e-12);
        assert!((m * c).amax() < 1e-12);
        // Quaternion products: V_IJ = v_K and cyclic.
        assert_eq!(m[(0, 1)], c.z);
        assert_eq!(m[(1, 2)], c.x);
        assert_eq!(m[(2, 0)], c.y);
    }
}

#[test]
fn rotation_is_the_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let v = random_v(&mut rng, 2.0);
        let t: f64 = rng.random_range(-3.0..3.0);
        let e = rotation(&v, t);
        let oracle = (v.skew() * (1.5 * t)).exp();
        assert!((e - oracle).amax() < 1e-12);
        assert!((e * e.transpose() - Matrix3::identity()).amax() < 1e-13);
        assert_relative_eq!(e.determinant(), 1.0, epsilon = 1e-13);
    }
}

#[test]
fn qhf_traces_match_ricci_scalars() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in 1..=3 {
        for _ in 0..200 {
            let v = random_v(&mut rng, 2.0);
            let t: f64 = rng.random_range(0.0..10.0);
            let blocks = curvature_blocks(&v, qhf_curvature_inputs(d, &v)).unwrap();
            let got = blocks.traces(t);
            let want = ricci_scalars(&v, 2.0 * v.norm_squared(), d);
            for (g, w) in [(got.a, want.a), (got.b, want.b), (got.c, want.c)] {
                assert!((g - w).abs() < 1e-10 * w.abs().max(1.0), "d = {d}: {g} vs {w}");
            }
            let zero = blocks.traces(0.0);
            assert!((zero.a - got.a).abs() < 1e-10 * got.a.abs().max(1.0));
        }
    }
}

#[test]
fn general_inputs_traces_match_ricci_scalars() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for d in 1..=3 {
        for _ in 0..100 {
            let v = random_v(&mut rng, 1.5);
            let inputs = random_inputs(d, &v, &mut rng);
            let rho = inputs.rho_a;
            let blocks = curvature_blocks(&v, inputs).unwrap();
            let t: f64 = rng.random_range(0.0..5.0);
            let got = blocks.traces(t);
            let want = ricci_scalars(&v, rho, d);
            for (g, w) in [(got.a, want.a), (got.b, want.b), (got.c, want.c)] {
                assert!((g - w).abs() < 1e-10 * w.abs().max(1.0), "d = {d}: {g} vs {w}");
            }
            let r = blocks.at(t);
            let m = r.matrix();
            assert!((m - m.transpose()).amax() < 1e-12);
            // R_ab is skew: the traced type-I curvature is diagonal.
            assert!(r.block(Block::A, Block::B).trace().abs() < 1e-12);
        }
    }
}

#[test]
fn sphere_constants_reproduce_bound_kappas() {
    // Round sphere: Ric_a/3 and Ric_b/3 are the κ's of the K = 1 bound.
    for i in 0..=30 {
        let vn = 0.1 * i as f64;
        let v = VerticalVector::new(vn * 0.6, 0.0, vn * 0.8);
        let ric = ricci_scalars(&v, 2.0 * v.norm_squared(), 2);
        let (ka, kb) = sasakian_kappas(vn, 1.0);
        assert_relative_eq!(ric.a / 3.0, ka, epsilon = 1e-12, max_relative = 1e-12);
        assert_relative_eq!(ric.b / 3.0, kb, epsilon = 1e-12);
        assert_relative_eq!(ric.c / 4.0, 1.0 + vn * vn, epsilon = 1e-12);
    }
}

#[test]
fn sphere_blocks_at_zero_vertical() {
    // v = 0 on the round sphere: R = diag(0, 4I, I_{c−1}, 0).
    for d in 1..=3 {
        let v = VerticalVector::zero();
        let blocks = curvature_blocks(&v, qhf_curvature_inputs(d, &v)).unwrap();
        let r = blocks.at(1.3);
        let c = 4 * d - 3;
        let mut want = DVector::zeros(6 + c);
        for i in 3..6 {
            want[i] = 4.0;
        }
        for i in 6..6 + c - 1 {
            want[i] = 1.0;
        }
        assert!((r.matrix() - DMatrix::from_diagonal(&want)).amax() < 1e-15);
    }
}

#[test]
fn z_vectors_are_orthogonal_to_v_directions() {
    // With orthonormal φ_α γ̇, Z_α = Σ V_{αβ} φ_β γ̇ up to sign, so Σ v_α Z_α = 0.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let phi: [DVector<f64>; 3] = [
        DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]),
    ];
    for _ in 0..100 {
        let v = random_v(&mut rng, 2.0);
        let z = z_vectors(&v, &phi);
        let c = v.components();
        let sum = &z[0] * c.x + &z[1] * c.y + &z[2] * c.z;
        assert!(sum.amax() < 1e-13);
        let gram = DMatrix::from_fn(3, 3, |i, j| z[i].dot(&z[j]));
        let m = v.skew();
        assert!((gram - DMatrix::from_column_slice(3, 3, (m * m.transpose()).as_slice())).amax() < 1e-12);
    }
}

#[test]
fn validation() {
    let v = VerticalVector::new(0.5, 0.2, -0.1);
    let mut bad = qhf_curvature_inputs(2, &v);
    bad.rho_a += 0.1;
    assert!(curvature_blocks(&v, bad).is_err());
    let mut bad = qhf_curvature_inputs(2, &v);
    bad.w = DVector::zeros(5);
    bad.w[0] = 1.0;
    assert!(curvature_blocks(&v, bad).is_err());
    let mut bad = qhf_curvature_inputs(2, &v);
    bad.aba[(0, 0)] += 1.0;
    assert!(curvature_blocks(&v, bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocks_rotate_with_v(vi in -2.0..2.0f64, vj in -2.0..2.0f64, vk in -2.0..2.0f64, t in 0.0..6.0f64) {
        // R_aa(t) = E(t) R_aa(0) E(t)ᵀ and R_cc is constant.
        let v = VerticalVector::new(vi, vj, vk);
        let blocks = curvature_blocks(&v, qhf_curvature_inputs(2, &v)).unwrap();
        let e = rotation(&v, t);
        let b0 = blocks.blocks_at(0.0);
        let bt = blocks.blocks_at(t);
        prop_assert!((bt.aa - e * b0.aa * e.transpose()).amax() < 1e-10 * b0.aa.amax().max(1.0));
        prop_assert!((bt.bb - e * b0.bb * e.transpose()).amax() < 1e-10 * b0.bb.amax().max(1.0));
        prop_assert!((&bt.cc - &b0.cc).amax() == 0.0);
    }
}
