//! Partial transpose and the positive-partial-transpose (PPT) test.
//!
//! The first subsystem is the one transposed: `sigma(m mu, n nu) = rho(n mu, m nu)`.
//! Transposing the second subsystem instead gives the global transpose of
//! this `sigma`, which has the same spectrum.

use num_complex::Complex64;
use serde::Serialize;

use crate::densemat::{hermitian_eigenvalues, kron, ComplexMatrix, Spectrum, EIGEN_TOL};
use crate::error::{Error, Result};
use crate::states::{check_amplitudes, BipartiteDensity};

pub const PPT_TOL: f64 = 1e-10;
pub const UNITARITY_TOL: f64 = 1e-10;

/// A Hermitian operator on a bipartite space. Unlike [`BipartiteDensity`]
/// it may have negative eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteOperator {
    pub mat: ComplexMatrix,
    pub d_a: usize,
    pub d_b: usize,
}

impl BipartiteOperator {
    pub fn spectrum(&self) -> Result<Spectrum> {
        hermitian_eigenvalues(&self.mat, EIGEN_TOL)
    }
}

/// Transposes the first-subsystem indices of an operator of order `dA * dB`.
pub fn partial_transpose_matrix(m: &ComplexMatrix, d_a: usize, d_b: usize) -> Result<ComplexMatrix> {
    if m.dim() != d_a * d_b {
        return Err(Error::Dimension(format!(
            "order {} does not factor as {d_a} x {d_b}",
            m.dim()
        )));
    }
    Ok(ComplexMatrix::from_fn(m.dim(), |r, c| {
        let (m_a, mu) = (r / d_b, r % d_b);
        let (n_a, nu) = (c / d_b, c % d_b);
        m.get(n_a * d_b + mu, m_a * d_b + nu)
    }))
}

pub fn partial_transpose(rho: &BipartiteDensity) -> BipartiteOperator {
    let mat = partial_transpose_matrix(rho.mat(), rho.d_a(), rho.d_b())
        .expect("density dimensions are consistent");
    BipartiteOperator {
        mat,
        d_a: rho.d_a(),
        d_b: rho.d_b(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PptVerdict {
    pub min_eigenvalue: f64,
    pub is_ppt: bool,
    pub spectrum: Spectrum,
    pub tol: f64,
}

impl PptVerdict {
    fn from_spectrum(spectrum: Spectrum, tol: f64) -> Self {
        let min_eigenvalue = spectrum.min();
        PptVerdict {
            min_eigenvalue,
            is_ppt: min_eigenvalue >= -tol,
            spectrum,
            tol,
        }
    }
}

/// Necessary condition for separability: no eigenvalue of the partial
/// transpose below `-tol`. A minimum of exactly zero counts as PPT.
pub fn ppt_check(rho: &BipartiteDensity, tol: f64) -> Result<PptVerdict> {
    assert!(tol >= 0.0, "PPT tolerance must be non-negative");
    let spectrum = partial_transpose(rho).spectrum()?;
    Ok(PptVerdict::from_spectrum(spectrum, tol))
}

/// PPT check for an arbitrary Hermitian operator viewed as bipartite.
pub fn ppt_check_matrix(m: &ComplexMatrix, d_a: usize, d_b: usize, tol: f64) -> Result<PptVerdict> {
    let sigma = partial_transpose_matrix(m, d_a, d_b)?;
    Ok(PptVerdict::from_spectrum(
        hermitian_eigenvalues(&sigma, EIGEN_TOL)?,
        tol,
    ))
}

/// `(U' (x) U'') rho (U' (x) U'')^dagger`
pub fn local_unitary_conjugate(
    rho: &BipartiteDensity,
    u_a: &ComplexMatrix,
    u_b: &ComplexMatrix,
) -> Result<BipartiteDensity> {
    if u_a.dim() != rho.d_a() || u_b.dim() != rho.d_b() {
        return Err(Error::Dimension(format!(
            "local factors {}x{} do not match subsystems {}x{}",
            u_a.dim(),
            u_b.dim(),
            rho.d_a(),
            rho.d_b()
        )));
    }
    for u in [u_a, u_b] {
        let defect = u.unitarity_defect();
        if defect >= UNITARITY_TOL {
            return Err(Error::NotUnitary { defect });
        }
    }
    let total = kron(u_a, u_b);
    BipartiteDensity::new(
        rho.mat().conjugate_by(&total).hermitian_part(),
        rho.d_a(),
        rho.d_b(),
    )
}

/// Fraction above which the mixture of `a|01> + b|10>` with `|00>`, `|11>`
/// has a negative partial-transpose eigenvalue: `1 / (1 + 2|ab|)`.
pub fn gisin_ppt_threshold(a: Complex64, b: Complex64) -> Result<f64> {
    check_amplitudes(a, b)?;
    Ok(1.0 / (1.0 + 2.0 * (a * b).norm()))
}

/// Werner fraction at which the PPT test starts to fail.
pub const WERNER_PPT_THRESHOLD: f64 = 1.0 / 3.0;
