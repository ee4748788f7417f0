use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcomp::riccati_engine::*;
use srcomp::scalar_models::{blowup_time_kab, finiteness_predicate, BlowUpTime};

fn random_symmetric(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

/// A controllable pair in the normal form: `A` a nilpotent shift on the first block, `B` the
/// projector onto the second.
fn shift_pair() -> StructuralPair {
    // Indices (a1, a2, b1, b2, c): A maps b_i → a_i, B projects onto (b1, b2, c).
    let mut a = DMatrix::zeros(5, 5);
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0, 1.0]));
    StructuralPair::new(a, b).unwrap()
}

/// `(M, N)` from `exp(tH) (I; 0)`.
fn expm_mn(pair: &StructuralPair, q: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = pair.n();
    let phi = (pair.hamiltonian(q) * t).exp();
    (
        phi.view((0, 0), (n, n)).into_owned(),
        phi.view((n, 0), (n, n)).into_owned(),
    )
}

#[test]
fn jacobi_matches_flow_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pair = shift_pair();
    assert!(kalman_check(pair.a(), pair.b(), 2).unwrap());
    for _ in 0..5 {
        let q = random_symmetric(5, 2.0, &mut rng);
        let sol = integrate_jacobi(&pair, |_| q.clone(), 3.0, 1e-11).unwrap();
        for t in [0.1, 0.7, 1.9, 3.0] {
            let (m, n) = sol.actual(t);
            let (m0, n0) = expm_mn(&pair, &q, t);
            let scale = m0.amax().max(n0.amax()).max(1.0);
            assert!((m - m0).amax() < 1e-8 * scale, "M at t = {t}");
            assert!((n - &n0).amax() < 1e-8 * scale, "N at t = {t}");
            assert_relative_eq!(sol.det_n(t), n0.determinant(), max_relative = 1e-6, epsilon = 1e-12);
        }
    }
}

#[test]
fn symplectic_defect_stays_small_through_renormalisation() {
    // Exponential growth forces many re-orthonormalisations.
    let pair = StructuralPair::riemannian(3);
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-9.0, -4.0, -1.0]));
    let sol = integrate_jacobi(&pair, |_| q.clone(), 30.0, 1e-10).unwrap();
    for i in 1..=30 {
        assert!(sol.symplectic_defect(i as f64) < 1e-8);
    }
    assert_eq!(riccati_solution(&sol).unwrap().blowup(), BlowUpTime::Infinite);
    // V converges to √(-Q).
    let v = riccati_solution(&sol).unwrap().at(30.0).unwrap();
    for (i, k) in [3.0, 2.0, 1.0].into_iter().enumerate() {
        assert_relative_eq!(v[(i, i)], k, max_relative = 1e-8);
    }
}

#[test]
fn riccati_residual_by_finite_differences() {
    // V̇ + AᵀV + VA + Q + VBV = 0.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pair = shift_pair();
    let q0 = random_symmetric(5, 1.0, &mut rng);
    let q1 = random_symmetric(5, 1.0, &mut rng);
    let q = move |t: f64| &q0 + &q1 * t.sin();
    let sol = integrate_jacobi(&pair, &q, 1.5, 1e-12).unwrap();
    let ric = riccati_solution(&sol).unwrap();
    let upper = ric.blowup().value().min(1.5);
    for u in [0.2, 0.5, 0.8] {
        let t = u * upper;
        let h = 1e-4;
        let dv = (ric.at(t + h).unwrap() - ric.at(t - h).unwrap()) / (2.0 * h);
        let v = ric.at(t).unwrap();
        let res = &dv + pair.a().transpose() * &v + &v * pair.a() + q(t) + &v * pair.b() * &v;
        assert!(res.amax() < 1e-5 * v.amax().max(1.0).powi(2), "t = {t}: {}", res.amax());
    }
}

#[test]
fn limit_datum_at_zero() {
    let pair = shift_pair();
    let q = DMatrix::identity(5, 5);
    let sol = integrate_jacobi(&pair, |_| q.clone(), 1.0, 1e-11).unwrap();
    let ric = riccati_solution(&sol).unwrap();
    assert!(ric.limit_datum_trend(&[0.5, 0.1, 0.05, 0.01, 0.005]).unwrap());
}

#[test]
fn type_i_free_solution_closed_form() {
    // Q = 0: V = ((12/t³, −6/t²), (−6/t², 4/t)).
    let pair = StructuralPair::type_i();
    let sol = integrate_jacobi(&pair, |_| DMatrix::zeros(2, 2), 2.0, 1e-12).unwrap();
    let ric = riccati_solution(&sol).unwrap();
    assert_eq!(ric.blowup(), BlowUpTime::Infinite);
    for t in [0.3, 1.0, 2.0] {
        let v = ric.at(t).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[12.0 / t.powi(3), -6.0 / t.powi(2), -6.0 / t.powi(2), 4.0 / t]);
        assert!((v - &want).amax() < 1e-7 * want.amax());
    }
}

#[test]
fn riemannian_blowups() {
    let pair = StructuralPair::riemannian(3);
    for k in [0.25f64, 1.0, 4.0] {
        let q = DMatrix::identity(3, 3) * k;
        let sol = integrate_jacobi(&pair, |_| q.clone(), 1.3 * PI / k.sqrt(), 1e-11).unwrap();
        let b = riccati_solution(&sol).unwrap().blowup();
        assert_relative_eq!(b.value(), PI / k.sqrt(), epsilon = 1e-8);
    }
}

#[test]
fn comparison_over_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pair = shift_pair();
    let grid: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
    for _ in 0..6 {
        let q2 = random_symmetric(5, 1.5, &mut rng);
        let p = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let q1 = &q2 + &p * p.transpose();
        let rep = comparison_harness(&pair, |_| q1.clone(), |_| q2.clone(), &grid, 1e-10).unwrap();
        assert!(rep.passes(), "min gap {}, {} vs {}", rep.min_gap, rep.blowup1, rep.blowup2);
    }
}

#[test]
fn comparison_rejects_wrong_order() {
    let pair = StructuralPair::riemannian(2);
    let err = comparison_harness(
        &pair,
        |_| DMatrix::zeros(2, 2),
        |_| DMatrix::identity(2, 2),
        &[0.5, 1.0],
        1e-10,
    );
    assert!(matches!(err, Err(srcomp::Error::Hypothesis(_))));
}

#[test]
fn spectral_criterion_for_riemannian_pairs() {
    // With A = 0 and B = I, blow-up is finite iff Q has a positive eigenvalue.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pair = StructuralPair::riemannian(3);
    for _ in 0..20 {
        let q = random_symmetric(3, 2.0, &mut rng);
        let lmax = -min_sym_eigenvalue(&(-&q));
        if lmax.abs() < 1e-3 {
            continue;
        }
        assert_eq!(finite_blowup_spectral(&pair, &q).unwrap(), lmax > 0.0, "λmax = {lmax}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn type_i_jacobi_agrees_with_scalar(ka in -5.0..5.0f64, kb in -5.0..5.0f64) {
        let pair = StructuralPair::type_i();
        let q = DMatrix::from_row_slice(2, 2, &[ka, 0.0, 0.0, kb]);
        prop_assert_eq!(finite_blowup_constant(&pair, &q).unwrap(), finiteness_predicate(ka, kb));
        if let BlowUpTime::Finite(t) = blowup_time_kab(ka, kb) {
            let sol = integrate_jacobi(&pair, |_| q.clone(), 1.1 * t, 1e-11).unwrap();
            let b = first_blowup(&sol, 1e-4, 1e-12).unwrap();
            prop_assert!((b.value() - t).abs() < 1e-6, "{} vs {}", b, t);
        }
    }

    #[test]
    fn kalman_index_of_shift_chains(len in 1usize..6) {
        // A single chain of length `len` driven at its end needs `len − 1` commutators.
        let n = len;
        let a = DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
        let mut b = DMatrix::zeros(n, n);
        b[(n - 1, n - 1)] = 1.0;
        prop_assert_eq!(kalman_index(&a, &b).unwrap(), Some(n - 1));
    }
}
