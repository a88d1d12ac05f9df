//! CHSH operator, correlation matrix and the exact maximum over settings.
//!
//! For a two-qubit state with correlation matrix `T_pq = Tr[(s_p (x) s_q) rho]`
//! the largest CHSH expectation over all spin settings is `2 sqrt(M)`,
//! where `M` is the sum of the two largest eigenvalues of `T^T T`.
//! Pauli ordering is `(x, y, z)`.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::densemat::{kron, symmetric_eigenvalues, ComplexMatrix};
use crate::error::{Error, Result};
use crate::states::{check_amplitudes, BipartiteDensity};

pub type Vec3 = [f64; 3];

/// Classical (local hidden variable) bound on the CHSH expectation.
pub const CLASSICAL_BOUND: f64 = 2.0;
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

const TRACE_IMAG_TOL: f64 = 1e-10;
const UNIT_TOL: f64 = 1e-12;

pub fn pauli(p: usize) -> ComplexMatrix {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let data = match p {
        0 => vec![z, one, one, z],
        1 => vec![z, -i, i, z],
        2 => vec![one, z, z, -one],
        _ => panic!("Pauli index {p} out of range"),
    };
    ComplexMatrix::from_row_major(2, data).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub t: [[f64; 3]; 3],
}

impl CorrelationMatrix {
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for (p, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|q| self.t[p][q] * v[q]).sum();
        }
        out
    }

    pub fn apply_transpose(&self, v: &Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for (q, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|p| self.t[p][q] * v[p]).sum();
        }
        out
    }

    /// `a . T b`
    pub fn bilinear(&self, a: &Vec3, b: &Vec3) -> f64 {
        dot(a, &self.apply(b))
    }

    /// Eigenvalues of `T^T T`, ascending.
    pub fn gram_eigenvalues(&self) -> Result<Vec3> {
        let mut g = [0.0; 9];
        for p in 0..3 {
            for q in 0..3 {
                g[p * 3 + q] = (0..3).map(|k| self.t[k][p] * self.t[k][q]).sum();
            }
        }
        let ev = symmetric_eigenvalues(&g, 3)?;
        Ok([ev[0], ev[1], ev[2]])
    }

    /// Sum of the two largest eigenvalues of `T^T T`.
    pub fn m_value(&self) -> Result<f64> {
        let ev = self.gram_eigenvalues()?;
        Ok((ev[1] + ev[2]).max(0.0))
    }
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Unit vector along `v`, or `fallback` when `v` vanishes.
fn direction(v: &Vec3, fallback: &Vec3) -> Vec3 {
    let n = norm(v);
    if n < 1e-300 {
        *fallback
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

/// Measurement directions for the observables `A = a.s`, `A' = a'.s`,
/// `B = b.s`, `B' = b'.s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshSettings {
    pub a: Vec3,
    pub a_prime: Vec3,
    pub b: Vec3,
    pub b_prime: Vec3,
}

impl ChshSettings {
    pub fn new(a: Vec3, a_prime: Vec3, b: Vec3, b_prime: Vec3) -> Result<Self> {
        for (name, v) in [("a", &a), ("a'", &a_prime), ("b", &b), ("b'", &b_prime)] {
            if (norm(v) - 1.0).abs() > UNIT_TOL {
                return Err(Error::OutOfRange(format!(
                    "setting {name} has norm {}, expected 1",
                    norm(v)
                )));
            }
        }
        Ok(Self {
            a,
            a_prime,
            b,
            b_prime,
        })
    }
}

fn require_two_qubit(rho: &BipartiteDensity) -> Result<()> {
    if !rho.is_two_qubit() {
        return Err(Error::Dimension(format!(
            "CHSH needs a two-qubit state, got {}x{}",
            rho.d_a(),
            rho.d_b()
        )));
    }
    Ok(())
}

fn pauli_products() -> &'static [ComplexMatrix; 9] {
    static PRODUCTS: OnceLock<[ComplexMatrix; 9]> = OnceLock::new();
    PRODUCTS.get_or_init(|| std::array::from_fn(|k| kron(&pauli(k / 3), &pauli(k % 3))))
}

/// Correlation matrix of any Hermitian 4x4 matrix, checking that the
/// traces come out real.
pub fn correlation_from_matrix(m: &ComplexMatrix) -> Result<CorrelationMatrix> {
    if m.dim() != 4 {
        return Err(Error::Dimension(format!("expected order 4, got {}", m.dim())));
    }
    let mut t = [[0.0; 3]; 3];
    for (k, o) in pauli_products().iter().enumerate() {
        // Tr(O m) without forming the product
        let mut e = Complex64::new(0.0, 0.0);
        for r in 0..4 {
            for c in 0..4 {
                e += o.get(r, c) * m.get(c, r);
            }
        }
        if e.im.abs() > TRACE_IMAG_TOL {
            return Err(Error::InvalidDensity(format!(
                "correlation T[{}][{}] has imaginary part {:e}",
                k / 3,
                k % 3,
                e.im
            )));
        }
        t[k / 3][k % 3] = e.re;
    }
    Ok(CorrelationMatrix { t })
}

pub fn t_matrix(rho: &BipartiteDensity) -> Result<CorrelationMatrix> {
    require_two_qubit(rho)?;
    correlation_from_matrix(rho.mat())
}

/// Maximum of the CHSH expectation over all spin measurement settings.
pub fn chsh_max(rho: &BipartiteDensity) -> Result<f64> {
    Ok(2.0 * t_matrix(rho)?.m_value()?.sqrt())
}

/// `<AB> + <AB'> + <A'B> - <A'B'>`
pub fn bell_expectation(rho: &BipartiteDensity, s: &ChshSettings) -> Result<f64> {
    let t = t_matrix(rho)?;
    Ok(t.bilinear(&s.a, &s.b) + t.bilinear(&s.a, &s.b_prime) + t.bilinear(&s.a_prime, &s.b)
        - t.bilinear(&s.a_prime, &s.b_prime))
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v: Vec3 = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = norm(&v);
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceChsh {
    pub value: f64,
    pub settings: ChshSettings,
}

/// Alternating maximization over settings, independent of the `T^T T`
/// eigenvalue formula.
///
/// With Bob's directions fixed the best `a` is along `T(b + b')` and the
/// best `a'` along `T(b - b')`; Bob's update is the mirror image through
/// `T^T`. Each half step is exact, so the value never decreases.
pub fn brute_force_chsh(
    rho: &BipartiteDensity,
    restarts: usize,
    tol: f64,
    seed: u64,
) -> Result<BruteForceChsh> {
    assert!(restarts >= 1, "at least one restart is required");
    let t = t_matrix(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<BruteForceChsh> = None;

    for _ in 0..restarts {
        let (mut a, mut ap) = (random_unit(&mut rng), random_unit(&mut rng));
        let (mut b, mut bp) = (random_unit(&mut rng), random_unit(&mut rng));
        let mut value = f64::NEG_INFINITY;
        for _ in 0..100_000 {
            a = direction(&t.apply(&add(&b, &bp)), &a);
            ap = direction(&t.apply(&sub(&b, &bp)), &ap);
            b = direction(&t.apply_transpose(&add(&a, &ap)), &b);
            bp = direction(&t.apply_transpose(&sub(&a, &ap)), &bp);
            let next = t.bilinear(&add(&a, &ap), &b) + t.bilinear(&sub(&a, &ap), &bp);
            let done = next - value <= tol * 1e-3;
            value = next;
            if done {
                break;
            }
        }
        if best.as_ref().is_none_or(|bst| value > bst.value) {
            best = Some(BruteForceChsh {
                value,
                settings: ChshSettings {
                    a,
                    a_prime: ap,
                    b,
                    b_prime: bp,
                },
            });
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// `1 / (1 + 2|ab| (sqrt(2) - 1))`, the local-filtering Bell threshold for
/// the `a|01> + b|10>` family. Reference value only.
pub fn gisin_filter_threshold(a: Complex64, b: Complex64) -> Result<f64> {
    check_amplitudes(a, b)?;
    Ok(1.0 / (1.0 + 2.0 * (a * b).norm() * (std::f64::consts::SQRT_2 - 1.0)))
}

/// Werner fraction above which the CHSH inequality is violated.
pub const WERNER_BELL_THRESHOLD: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Werner fraction quoted for the alpha-entropic inequality. Annotation
/// only; the inequality itself is not implemented.
pub const WERNER_ALPHA_ENTROPIC_REFERENCE: f64 = 0.577_350_269_189_625_8;

/// Bell-validity bound quoted for the singlet-plus-polarized family. The
/// exact maximum from `T^T T` crosses 2 at `1/sqrt(2)` instead; `0.8` is
/// where `x^2 + (1 - 2x)^2 = 1`, i.e. a different eigenvalue pair.
pub const POLARIZED_QUOTED_BELL_BOUND: f64 = 0.8;

/// Bisection for the point in `[lo, hi]` where `f` crosses `level`,
/// assuming `f(lo) <= level < f(hi)`.
pub fn bisect_crossing(
    mut f: impl FnMut(f64) -> Result<f64>,
    level: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Singlet fraction at which `chsh_max` of the singlet-plus-polarized
/// mixture first exceeds the classical bound.
pub fn polarized_bell_threshold() -> Result<f64> {
    bisect_crossing(
        |x| chsh_max(&crate::states::singlet_plus_polarized(x)?),
        CLASSICAL_BOUND,
        0.0,
        1.0,
        1e-13,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{sampling, singlet, singlet_plus_polarized, werner};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn assert_t(t: &CorrelationMatrix, want: [[f64; 3]; 3]) {
        for p in 0..3 {
            for q in 0..3 {
                assert_abs_diff_eq!(t.t[p][q], want[p][q], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn singlet_correlations() {
        let t = t_matrix(&singlet()).unwrap();
        assert_t(&t, [[-1., 0., 0.], [0., -1., 0.], [0., 0., -1.]]);
    }

    #[test]
    fn werner_correlations() {
        let x = 0.37;
        let t = t_matrix(&werner(x).unwrap()).unwrap();
        assert_t(&t, [[-x, 0., 0.], [0., -x, 0.], [0., 0., -x]]);
    }

    #[test]
    fn polarized_product_correlations() {
        let rho = singlet_plus_polarized(0.0).unwrap();
        let t = t_matrix(&rho).unwrap();
        assert_t(&t, [[0., 0., 0.], [0., 0., 0.], [0., 0., 1.]]);
    }

    #[test]
    fn rejects_non_qubit_states() {
        let rho = BipartiteDensity::new(ComplexMatrix::identity(6).scale_real(1.0 / 6.0), 2, 3)
            .unwrap();
        assert!(matches!(t_matrix(&rho), Err(Error::Dimension(_))));
        assert!(chsh_max(&rho).is_err());
    }

    #[test]
    fn maxima() {
        assert_abs_diff_eq!(chsh_max(&werner(1.0).unwrap()).unwrap(), 2.0 * SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(
            chsh_max(&werner(FRAC_1_SQRT_2).unwrap()).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        // T = diag(-0.8, -0.8, -0.6)
        assert_abs_diff_eq!(
            chsh_max(&singlet_plus_polarized(0.8).unwrap()).unwrap(),
            2.0 * 1.28f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn expectation_examples() {
        let h = FRAC_1_SQRT_2;
        let z = [0., 0., 1.];
        let x = [1., 0., 0.];
        let s = ChshSettings::new(z, x, [-h, 0., -h], [h, 0., -h]).unwrap();
        assert_abs_diff_eq!(bell_expectation(&singlet(), &s).unwrap(), 2.0 * SQRT_2, epsilon = 1e-14);

        let all_z = ChshSettings::new(z, z, z, z).unwrap();
        let up = singlet_plus_polarized(0.0).unwrap();
        assert_abs_diff_eq!(bell_expectation(&up, &all_z).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_settings_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rho = sampling::random_density(2, 2, &mut rng);
            let (a, b) = (random_unit(&mut rng), random_unit(&mut rng));
            let s = ChshSettings::new(a, a, b, b).unwrap();
            let v = bell_expectation(&rho, &s).unwrap();
            let t = t_matrix(&rho).unwrap();
            assert_abs_diff_eq!(v, 2.0 * t.bilinear(&a, &b), epsilon = 1e-14);
            assert!(v.abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn non_unit_settings_rejected() {
        assert!(ChshSettings::new([1., 1., 0.], [1., 0., 0.], [1., 0., 0.], [1., 0., 0.]).is_err());
    }

    #[test]
    fn brute_force_agrees() {
        let w = werner(0.9).unwrap();
        let bf = brute_force_chsh(&w, 32, 1e-12, 5).unwrap();
        assert_abs_diff_eq!(bf.value, chsh_max(&w).unwrap(), epsilon = 1e-6);
        let v = bell_expectation(&w, &bf.settings).unwrap();
        assert_abs_diff_eq!(v, bf.value, epsilon = 1e-12);

        let up = singlet_plus_polarized(0.0).unwrap();
        let bf = brute_force_chsh(&up, 8, 1e-12, 5).unwrap();
        assert_abs_diff_eq!(bf.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn filter_thresholds() {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert_abs_diff_eq!(gisin_filter_threshold(h, h).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(gisin_filter_threshold(one, zero).unwrap(), 1.0);
        let v = gisin_filter_threshold(Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0)).unwrap();
        assert_abs_diff_eq!(v, 0.7155, epsilon = 1e-4);
    }

    #[test]
    fn polarized_threshold_from_exact_maximum() {
        // M = 2x^2 once x >= 1/3, so the crossing is at 1/sqrt(2)
        assert_abs_diff_eq!(polarized_bell_threshold().unwrap(), FRAC_1_SQRT_2, epsilon = 1e-10);
        // the quoted bound corresponds to the (x^2, (1-2x)^2) pair
        let x = POLARIZED_QUOTED_BELL_BOUND;
        assert_abs_diff_eq!(x * x + (1.0 - 2.0 * x).powi(2), 1.0, epsilon = 1e-15);
    }
}
