use entangle_core::densemat::{
    hermitian_eigenvalues, hermitian_embedded_eigen, from_real_embedding, kron,
    regroup_parties_to_pairs, regroup_pairs_to_parties, ComplexMatrix, EIGEN_TOL,
};
use entangle_core::separability::{
    local_unitary_conjugate, partial_transpose, partial_transpose_matrix, ppt_check, PPT_TOL,
};
use entangle_core::states::{from_ensemble, gisin_family, sampling, singlet_plus_polarized, werner};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_hermitian(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = sampling::random_unitary(d, &mut rng);
    let raw = ComplexMatrix::from_fn(d, |r, c| g.get(r, c) * (1.0 + r as f64) - g.get(c, r).conj());
    raw.hermitian_part()
}

fn random_matrix(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = sampling::random_unitary(d, &mut rng);
    let v = sampling::random_unitary(d, &mut rng);
    &u + &v.scale(Complex64::new(0.3, -0.7))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigen_reconstruction(d in 1usize..=24, seed in any::<u64>()) {
        let m = random_hermitian(d, seed);
        let eig = hermitian_embedded_eigen(&m, EIGEN_TOL).unwrap();
        let back = from_real_embedding(&eig.reconstruct(), d);
        prop_assert!((&back - &m).frobenius_norm() < 1e-8);

        let spec = hermitian_eigenvalues(&m, EIGEN_TOL).unwrap();
        prop_assert_eq!(spec.values.len(), d);
        prop_assert!(spec.values.windows(2).all(|w| w[0] <= w[1]));
        let sum: f64 = spec.values.iter().sum();
        prop_assert!((sum - m.trace().re).abs() < 1e-10 * d as f64);
    }

    #[test]
    fn eigen_residuals(d in 1usize..=16, seed in any::<u64>()) {
        let m = random_hermitian(d, seed);
        let eig = hermitian_embedded_eigen(&m, EIGEN_TOL).unwrap();
        for (lambda, w) in eig.values.iter().zip(&eig.vectors) {
            // (p, q) in the embedding is the complex direction p + iq
            let v: Vec<Complex64> = (0..d).map(|k| Complex64::new(w[k], w[k + d])).collect();
            let mv = m.mul_vec(&v);
            let res = mv.iter().zip(&v).map(|(a, b)| (a - b * lambda).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(res <= 10.0 * EIGEN_TOL * m.frobenius_norm().max(1.0), "residual {res}");
        }
    }

    #[test]
    fn kron_associative(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (random_matrix(2, s1), random_matrix(3, s2), random_matrix(2, s3));
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-14);
        let tr = kron(&a, &b).trace();
        prop_assert!((tr - a.trace() * b.trace()).norm() < 1e-13);
    }

    #[test]
    fn regroup_is_a_permutation(n in 1usize..=3, seed in any::<u64>()) {
        let m = random_matrix(1 << (2 * n), seed);
        let g = regroup_pairs_to_parties(&m, n).unwrap();
        prop_assert!((g.trace() - m.trace()).norm() < 1e-12);
        prop_assert_eq!(regroup_parties_to_pairs(&g, n).unwrap(), m);
    }

    #[test]
    fn partial_transpose_involution(da in 1usize..=3, db in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = sampling::random_density(da, db, &mut rng);
        let sigma = partial_transpose(&rho);
        prop_assert!((sigma.mat.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(sigma.mat.hermiticity_defect().0 < 1e-15);
        prop_assert_eq!(partial_transpose_matrix(&sigma.mat, da, db).unwrap(), rho.mat().clone());
    }

    #[test]
    fn gisin_threshold_separates(re in -1.0f64..1.0, im in -1.0f64..1.0, phase in 0.0f64..6.28, t in 0.02f64..0.98) {
        let a = Complex64::new(re, im);
        prop_assume!(a.norm() > 0.05 && a.norm() < 0.95);
        let a = a / a.norm() * t.sqrt();
        let b = Complex64::from_polar((1.0 - t).sqrt(), phase);
        let th = 1.0 / (1.0 + 2.0 * (a * b).norm());
        let below = ppt_check(&gisin_family(a, b, (th - 1e-3).max(0.0)).unwrap(), PPT_TOL).unwrap();
        prop_assert!(below.is_ppt);
        if th + 1e-3 <= 1.0 {
            let above = ppt_check(&gisin_family(a, b, th + 1e-3).unwrap(), PPT_TOL).unwrap();
            prop_assert!(!above.is_ppt);
        }
    }
}

#[test]
fn werner_spectrum_grid() {
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        let s = partial_transpose(&werner(x).unwrap()).spectrum().unwrap();
        let mut want = [(1.0 - 3.0 * x) / 4.0, (1.0 + x) / 4.0, (1.0 + x) / 4.0, (1.0 + x) / 4.0];
        want.sort_by(f64::total_cmp);
        for (g, w) in s.values.iter().zip(want) {
            assert!((g - w).abs() < 1e-10, "x = {x}");
        }
    }
}

#[test]
fn local_unitaries_preserve_partial_transpose_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..200 {
        let (da, db) = [(2, 2), (2, 3), (3, 2)][k % 3];
        let rho = sampling::random_density(da, db, &mut rng);
        let ua = sampling::random_unitary(da, &mut rng);
        let ub = sampling::random_unitary(db, &mut rng);
        let moved = local_unitary_conjugate(&rho, &ua, &ub).unwrap();
        let before = partial_transpose(&rho).spectrum().unwrap();
        let after = partial_transpose(&moved).spectrum().unwrap();
        for (x, y) in before.values.iter().zip(&after.values) {
            assert!((x - y).abs() < 1e-9, "sample {k}: {x} vs {y}");
        }
        let full_before = hermitian_eigenvalues(rho.mat(), EIGEN_TOL).unwrap();
        let full_after = hermitian_eigenvalues(moved.mat(), EIGEN_TOL).unwrap();
        for (x, y) in full_before.values.iter().zip(&full_after.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn separable_ensembles_are_ppt() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..200 {
        let (da, db) = [(2, 2), (2, 3), (3, 2), (3, 3)][k % 4];
        let e = sampling::random_product_ensemble(da, db, &mut rng);
        let rho = from_ensemble(&e).unwrap();
        assert!(rho.validate().unwrap().passed);
        assert!(ppt_check(&rho, PPT_TOL).unwrap().is_ppt, "ensemble {k}");
    }
}

#[test]
fn constructors_validate_across_parameters() {
    for k in 0..=20 {
        let x = k as f64 / 20.0;
        assert!(werner(x).unwrap().validate().unwrap().passed);
        assert!(singlet_plus_polarized(x).unwrap().validate().unwrap().passed);
    }
}
