//! Bipartite density matrices and the state families used throughout the
//! crate.
//!
//! Composite indices are row-major: for a first subsystem of dimension `dA`
//! and a second of dimension `dB`, the basis state `|m mu>` sits at index
//! `m * dB + mu`. Index `0` is "up", `1` is "down".

use num_complex::Complex64;
use serde::Serialize;

use crate::densemat::{hermitian_eigenvalues, kron, ComplexMatrix, EIGEN_TOL};
use crate::error::{Error, Result};

pub const DENSITY_HERMITIAN_TOL: f64 = 1e-12;
pub const DENSITY_TRACE_TOL: f64 = 1e-12;
pub const DENSITY_MIN_EIGENVALUE: f64 = -1e-10;
pub const AMPLITUDE_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteDensity {
    mat: ComplexMatrix,
    d_a: usize,
    d_b: usize,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

impl ValidationReport {
    fn describe(&self) -> String {
        let mut problems = Vec::new();
        if self.hermiticity_defect > DENSITY_HERMITIAN_TOL {
            problems.push(format!("Hermiticity defect {:e}", self.hermiticity_defect));
        }
        if self.trace_defect > DENSITY_TRACE_TOL {
            problems.push(format!("trace defect {:e}", self.trace_defect));
        }
        if self.min_eigenvalue < DENSITY_MIN_EIGENVALUE {
            problems.push(format!("minimum eigenvalue {:e}", self.min_eigenvalue));
        }
        problems.join(", ")
    }
}

/// Checks the density-matrix invariants without constructing anything.
pub fn validate(mat: &ComplexMatrix, d_a: usize, d_b: usize) -> Result<ValidationReport> {
    if d_a == 0 || d_b == 0 || mat.dim() != d_a * d_b {
        return Err(Error::Dimension(format!(
            "order {} does not factor as {d_a} x {d_b}",
            mat.dim()
        )));
    }
    let (hermiticity_defect, _, _) = mat.hermiticity_defect();
    let tr = mat.trace();
    let trace_defect = (tr - Complex64::new(1.0, 0.0)).norm();
    let min_eigenvalue = hermitian_eigenvalues(&mat.hermitian_part(), EIGEN_TOL)?.min();
    let passed = hermiticity_defect <= DENSITY_HERMITIAN_TOL
        && trace_defect <= DENSITY_TRACE_TOL
        && min_eigenvalue >= DENSITY_MIN_EIGENVALUE;
    Ok(ValidationReport {
        hermiticity_defect,
        trace_defect,
        min_eigenvalue,
        passed,
    })
}

impl BipartiteDensity {
    pub fn new(mat: ComplexMatrix, d_a: usize, d_b: usize) -> Result<Self> {
        let report = validate(&mat, d_a, d_b)?;
        if !report.passed {
            return Err(Error::InvalidDensity(report.describe()));
        }
        Ok(Self { mat, d_a, d_b })
    }

    /// Two-qubit state from a 4x4 matrix.
    pub fn qubits(mat: ComplexMatrix) -> Result<Self> {
        Self::new(mat, 2, 2)
    }

    /// Skips validation. Only for values valid by construction.
    pub(crate) fn new_unchecked(mat: ComplexMatrix, d_a: usize, d_b: usize) -> Self {
        debug_assert_eq!(mat.dim(), d_a * d_b);
        Self { mat, d_a, d_b }
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> ComplexMatrix {
        self.mat
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    /// `rho_{m mu, n nu}`
    pub fn entry(&self, m: usize, mu: usize, n: usize, nu: usize) -> Complex64 {
        self.mat.get(m * self.d_b + mu, n * self.d_b + nu)
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        validate(&self.mat, self.d_a, self.d_b)
    }

    pub fn is_two_qubit(&self) -> bool {
        self.d_a == 2 && self.d_b == 2
    }
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("{name} = {x} must lie in [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_amplitudes(a: Complex64, b: Complex64) -> Result<()> {
    let norm = a.norm_sqr() + b.norm_sqr();
    if (norm - 1.0).abs() > AMPLITUDE_NORM_TOL {
        return Err(Error::Unnormalized(norm));
    }
    Ok(())
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn singlet_matrix() -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(4);
    s[(1, 1)] = real(0.5);
    s[(2, 2)] = real(0.5);
    s[(1, 2)] = real(-0.5);
    s[(2, 1)] = real(-0.5);
    s
}

/// The antisymmetric state `(|01> - |10>)/sqrt(2)`.
pub fn singlet_vector() -> [Complex64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [real(0.0), real(h), real(-h), real(0.0)]
}

pub fn singlet() -> BipartiteDensity {
    BipartiteDensity::new_unchecked(singlet_matrix(), 2, 2)
}

/// Singlet fraction `x` mixed with the maximally mixed state.
pub fn werner(x: f64) -> Result<BipartiteDensity> {
    check_unit_interval("x", x)?;
    let mixed = ComplexMatrix::identity(4).scale_real((1.0 - x) / 4.0);
    let mat = &singlet_matrix().scale_real(x) + &mixed;
    Ok(BipartiteDensity::new_unchecked(mat, 2, 2))
}

/// Fraction `x` of `a|01> + b|10>` with `(1-x)/2` each of `|00>` and `|11>`.
pub fn gisin_family(a: Complex64, b: Complex64, x: f64) -> Result<BipartiteDensity> {
    check_amplitudes(a, b)?;
    check_unit_interval("x", x)?;
    let mut m = ComplexMatrix::zeros(4);
    m[(0, 0)] = real((1.0 - x) / 2.0);
    m[(3, 3)] = real((1.0 - x) / 2.0);
    m[(1, 1)] = real(x * a.norm_sqr());
    m[(2, 2)] = real(x * b.norm_sqr());
    m[(1, 2)] = a * b.conj() * x;
    m[(2, 1)] = (a * b.conj() * x).conj();
    Ok(BipartiteDensity::new_unchecked(m, 2, 2))
}

/// Singlet fraction `x` mixed with the polarized product `|00>`.
pub fn singlet_plus_polarized(x: f64) -> Result<BipartiteDensity> {
    check_unit_interval("x", x)?;
    let mut mat = singlet_matrix().scale_real(x);
    mat[(0, 0)] += real(1.0 - x);
    Ok(BipartiteDensity::new_unchecked(mat, 2, 2))
}

/// Single-subsystem density matrix, checked for unit trace and positivity.
pub fn local_density(mat: ComplexMatrix) -> Result<ComplexMatrix> {
    let d = mat.dim();
    BipartiteDensity::new(mat, d, 1).map(BipartiteDensity::into_mat)
}

#[derive(Debug, Clone)]
pub struct ProductTerm {
    pub weight: f64,
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
}

/// A convex combination of product states.
#[derive(Debug, Clone)]
pub struct ProductEnsemble {
    terms: Vec<ProductTerm>,
    d_a: usize,
    d_b: usize,
}

impl ProductEnsemble {
    pub fn new(terms: Vec<ProductTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidDensity("empty ensemble".into()))?;
        let (d_a, d_b) = (first.left.dim(), first.right.dim());
        let mut total = 0.0;
        for (k, t) in terms.iter().enumerate() {
            if !(t.weight > 0.0) {
                return Err(Error::OutOfRange(format!(
                    "weight {k} = {} must be positive",
                    t.weight
                )));
            }
            if t.left.dim() != d_a || t.right.dim() != d_b {
                return Err(Error::Dimension(format!(
                    "term {k} has factors {}x{}, expected {d_a}x{d_b}",
                    t.left.dim(),
                    t.right.dim()
                )));
            }
            for (side, f) in [("left", &t.left), ("right", &t.right)] {
                let report = validate(f, f.dim(), 1)?;
                if !report.passed {
                    return Err(Error::InvalidDensity(format!(
                        "term {k} {side} factor: {}",
                        report.describe()
                    )));
                }
            }
            total += t.weight;
        }
        if (total - 1.0).abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidDensity(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { terms, d_a, d_b })
    }

    pub fn terms(&self) -> &[ProductTerm] {
        &self.terms
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }
}

/// `sum_K w_K rho'_K (x) rho''_K`
pub fn from_ensemble(e: &ProductEnsemble) -> Result<BipartiteDensity> {
    let (d_a, d_b) = e.dims();
    let mut acc = ComplexMatrix::zeros(d_a * d_b);
    for t in e.terms() {
        acc = &acc + &kron(&t.left, &t.right).scale_real(t.weight);
    }
    BipartiteDensity::new(acc.hermitian_part(), d_a, d_b)
}

/// Seeded generators of random states and unitaries.
pub mod sampling {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    }

    fn normalize(v: &mut [Complex64]) {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= n);
    }

    pub fn random_pure_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = (0..d).map(|_| gaussian(rng)).collect();
        normalize(&mut v);
        v
    }

    /// Gram-Schmidt on a complex Ginibre matrix. Rows of the result are
    /// orthonormal.
    pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
        let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(d);
        while rows.len() < d {
            let mut v: Vec<Complex64> = (0..d).map(|_| gaussian(rng)).collect();
            for u in &rows {
                let proj: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(u).for_each(|(x, a)| *x -= proj * a);
            }
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|z| *z /= n);
            rows.push(v);
        }
        ComplexMatrix::from_fn(d, |r, c| rows[r][c])
    }

    /// Random probability vector of length `k`, every entry positive.
    pub fn random_weights<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    }

    /// Full-rank state: a random diagonal density conjugated by a random
    /// unitary.
    pub fn random_density<R: Rng + ?Sized>(d_a: usize, d_b: usize, rng: &mut R) -> BipartiteDensity {
        let d = d_a * d_b;
        let diag = ComplexMatrix::diagonal(&random_weights(d, rng));
        let u = random_unitary(d, rng);
        BipartiteDensity::new(diag.conjugate_by(&u).hermitian_part(), d_a, d_b)
            .expect("unitary conjugate of a diagonal density is a density")
    }

    /// Mixture of `1..=6` random pure product states.
    pub fn random_product_ensemble<R: Rng + ?Sized>(
        d_a: usize,
        d_b: usize,
        rng: &mut R,
    ) -> ProductEnsemble {
        let k = rng.random_range(1..=6);
        let mut weights = random_weights(k, rng);
        // force an exact unit sum
        let head: f64 = weights[..k - 1].iter().sum();
        weights[k - 1] = 1.0 - head;
        let terms = weights
            .into_iter()
            .map(|weight| ProductTerm {
                weight,
                left: ComplexMatrix::outer(&random_pure_vector(d_a, rng)),
                right: ComplexMatrix::outer(&random_pure_vector(d_b, rng)),
            })
            .collect();
        ProductEnsemble::new(terms).expect("random product ensemble is valid")
    }
}
