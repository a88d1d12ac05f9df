use entangle_core::chsh::{bell_expectation, brute_force_chsh, chsh_max, t_matrix, ChshSettings};
use entangle_core::collective::{
    mirror_rows, pair_power, pair_power_dense, postselect, xor_rows, LocalRows,
};
use entangle_core::densemat::{kron, regroup_pairs_to_parties, ComplexMatrix};
use entangle_core::separability::{
    local_unitary_conjugate, partial_transpose, partial_transpose_matrix, ppt_check,
    ppt_check_matrix, PPT_TOL,
};
use entangle_core::states::{sampling, werner, BipartiteDensity};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / n)
}

fn random_rows<R: Rng>(n: usize, rng: &mut R) -> LocalRows {
    let len = 1 << n;
    let u0: Vec<Complex64> = sampling::random_pure_vector(len, rng);
    let mut u1: Vec<Complex64> = sampling::random_pure_vector(len, rng);
    let p: Complex64 = u0.iter().zip(&u1).map(|(a, b)| a.conj() * b).sum();
    u1.iter_mut().zip(&u0).for_each(|(b, a)| *b -= p * a);
    let nrm = u1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    u1.iter_mut().for_each(|z| *z /= nrm);
    LocalRows::new(n, u0, u1).unwrap()
}

/// Direct index sum over every party index: the definition of the kept
/// matrix without the sparse contraction.
fn postselect_by_index_sum(
    rho: &BipartiteDensity,
    n: usize,
    u: &LocalRows,
    v: &LocalRows,
) -> (ComplexMatrix, f64) {
    let p = pair_power_dense(rho, n).unwrap();
    let len = 1 << n;
    let a_op = |i: usize, row: usize| {
        let (mu, nu) = (i >> 1, i & 1);
        let (a, b) = (row / len, row % len);
        u.row(mu)[a] * v.row(nu)[b]
    };
    let mut out = ComplexMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..len * len {
                let ar = a_op(i, r);
                if ar.norm() == 0.0 {
                    continue;
                }
                for c in 0..len * len {
                    acc += ar * p.get(r, c) * a_op(j, c).conj();
                }
            }
            out[(i, j)] = acc;
        }
    }
    let tr = out.trace().re;
    (out.scale_real(1.0 / tr), tr)
}

/// Full-unitary route: apply `U (x) V` to the whole party-major matrix and
/// keep the block where every tested qubit reads 0.
fn postselect_by_full_unitaries(
    rho: &BipartiteDensity,
    n: usize,
    ua: &ComplexMatrix,
    ub: &ComplexMatrix,
) -> (ComplexMatrix, f64) {
    let p = pair_power(rho, n).unwrap();
    let moved = p.conjugate_by(&kron(ua, ub));
    let len = 1 << n;
    let half = len / 2;
    let keep = |i: usize| {
        let (mu, nu) = (i >> 1, i & 1);
        (mu * half) * len + nu * half
    };
    let out = ComplexMatrix::from_fn(4, |i, j| moved.get(keep(i), keep(j)));
    let tr = out.trace().re;
    (out.scale_real(1.0 / tr), tr)
}

#[test]
fn oracle_matches_formula_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for k in 0..100 {
        let rho = sampling::random_density(2, 2, &mut rng);
        let bf = brute_force_chsh(&rho, 32, 1e-12, k).unwrap();
        let exact = chsh_max(&rho).unwrap();
        assert!((bf.value - exact).abs() < 1e-5, "state {k}: {} vs {exact}", bf.value);
        assert!(bf.value <= exact + 1e-9);
    }
}

#[test]
fn werner_maximum_is_linear() {
    let mut prev = -1.0;
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        let v = chsh_max(&werner(x).unwrap()).unwrap();
        assert!((v - 2.0 * std::f64::consts::SQRT_2 * x).abs() < 1e-12);
        assert!(v > prev || k == 0);
        prev = v;
    }
}

#[test]
fn settings_never_exceed_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let rho = sampling::random_density(2, 2, &mut rng);
        let s = ChshSettings::new(unit(&mut rng), unit(&mut rng), unit(&mut rng), unit(&mut rng))
            .unwrap();
        let v = bell_expectation(&rho, &s).unwrap();
        assert!(v.abs() <= chsh_max(&rho).unwrap() + 1e-12);
        assert!(v.abs() <= 2.0 * std::f64::consts::SQRT_2 + 1e-9);
    }
}

#[test]
fn maximum_is_local_unitary_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let rho = sampling::random_density(2, 2, &mut rng);
        let ua = sampling::random_unitary(2, &mut rng);
        let ub = sampling::random_unitary(2, &mut rng);
        let moved = local_unitary_conjugate(&rho, &ua, &ub).unwrap();
        assert!((chsh_max(&rho).unwrap() - chsh_max(&moved).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn correlation_entries_are_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let t = t_matrix(&sampling::random_density(2, 2, &mut rng)).unwrap();
        assert!(t.t.iter().flatten().all(|v| v.abs() <= 1.0 + 1e-12));
    }
}

#[test]
fn sparse_postselection_matches_index_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in 1..=3 {
        for _ in 0..3 {
            let rho = sampling::random_density(2, 2, &mut rng);
            let (u, v) = (random_rows(n, &mut rng), random_rows(n, &mut rng));
            let out = postselect(&rho, n, &u, &v).unwrap();
            let (oracle, p) = postselect_by_index_sum(&rho, n, &u, &v);
            assert!(out.rho_new.mat().max_abs_diff(&oracle) < 1e-12);
            assert!((out.success_probability - p).abs() < 1e-13);
        }
    }
}

#[test]
fn only_two_rows_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in 1..=3 {
        let rho = sampling::random_density(2, 2, &mut rng);
        let (u, v) = (random_rows(n, &mut rng), random_rows(n, &mut rng));
        let out = postselect(&rho, n, &u, &v).unwrap();
        for _ in 0..3 {
            let filler: Vec<Vec<Complex64>> = (0..(1 << n))
                .map(|_| sampling::random_pure_vector(1 << n, &mut rng))
                .collect();
            let ua = u.complete_to_unitary(&filler).unwrap();
            let ub = v.complete_to_unitary(&filler[1..]).unwrap();
            assert!(ua.unitarity_defect() < 1e-12);
            let (kept, p) = postselect_by_full_unitaries(&rho, n, &ua, &ub);
            assert!(kept.max_abs_diff(out.rho_new.mat()) < 1e-12, "n = {n}");
            assert!((p - out.success_probability).abs() < 1e-13);
        }
    }
}

#[test]
fn success_probability_in_unit_interval() {
    for n in 1..=5 {
        let u = xor_rows(n).unwrap();
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            let out = postselect(&werner(x).unwrap(), n, &u, &mirror_rows(&u)).unwrap();
            assert!(out.success_probability > 0.0 && out.success_probability <= 1.0 + 1e-15);
            assert!(out.rho_new.validate().unwrap().passed);
        }
    }
}

#[test]
fn single_pair_rows_are_local_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..50 {
        let rho = sampling::random_density(2, 2, &mut rng);
        let (u, v) = (random_rows(1, &mut rng), random_rows(1, &mut rng));
        let out = postselect(&rho, 1, &u, &v).unwrap();
        assert!((out.success_probability - 1.0).abs() < 1e-12);
        assert!((chsh_max(&out.rho_new).unwrap() - chsh_max(&rho).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn partial_transpose_of_two_copies_is_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..20 {
        let rho = sampling::random_density(2, 2, &mut rng);
        let sigma = partial_transpose(&rho).mat;
        let lhs = partial_transpose_matrix(&pair_power(&rho, 2).unwrap(), 4, 4).unwrap();
        let rhs = regroup_pairs_to_parties(&kron(&sigma, &sigma), 2).unwrap();
        assert_eq!(lhs, rhs);
    }
    for k in 0..=10 {
        let rho = werner(k as f64 / 30.0).unwrap();
        assert!(ppt_check(&rho, PPT_TOL).unwrap().is_ppt);
        let two = pair_power(&rho, 2).unwrap();
        assert!(ppt_check_matrix(&two, 4, 4, PPT_TOL).unwrap().is_ppt);
    }
}
