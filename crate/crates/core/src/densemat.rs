//! Dense complex matrices and the Hermitian eigensolver.
//!
//! Matrices are square and stored row-major. The eigensolver runs cyclic
//! Jacobi rotations on the real symmetric embedding
//!
//! ```text
//!     H = X + iY   ->   [ X  -Y ]
//!                       [ Y   X ]
//! ```
//!
//! whose spectrum is the spectrum of `H` with every eigenvalue doubled.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise threshold for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default off-diagonal threshold for Jacobi sweeps.
pub const EIGEN_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix order must be positive");
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.data[r * dim + c] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from a row-major buffer, rejecting non-square or
    /// non-finite input.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for order {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(dim, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |r, c| {
            if r == c {
                Complex64::new(values[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `|v><v|`
    pub fn outer(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise violation of `M = M^dagger` with its location.
    pub fn hermiticity_defect(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for r in 0..self.dim {
            for c in r..self.dim {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm();
                if d > worst.0 {
                    worst = (d, r, c);
                }
            }
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let (defect, row, col) = self.hermiticity_defect();
        if defect > tol {
            return Err(Error::NotHermitian { row, col, defect });
        }
        Ok(())
    }

    /// `(M + M^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |r, c| (self.get(r, c) + self.get(c, r).conj()) * 0.5)
    }

    /// Max elementwise deviation of `U U^dagger` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        (self * &self.adjoint()).max_abs_diff(&Self::identity(self.dim))
    }

    /// `U M U^dagger`
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Permutation conjugation: entry `(perm[r], perm[c])` of the output is
    /// entry `(r, c)` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[(perm[r], perm[c])] = self.get(r, c);
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "order mismatch in product");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[r * n..(r + 1) * n];
                for (o, b) in out_row.iter_mut().zip(&rhs.data[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for r in 0..self.dim {
            write!(f, "  ")?;
            for c in 0..self.dim {
                let z = self.get(r, c);
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product: entry `(a*dB + b, c*dB + d)` is `A(a,c) * B(b,d)`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim(), b.dim());
    let mut out = ComplexMatrix::zeros(da * db);
    for ar in 0..da {
        for ac in 0..da {
            let x = a.get(ar, ac);
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for br in 0..db {
                for bc in 0..db {
                    out[(ar * db + br, ac * db + bc)] = x * b.get(br, bc);
                }
            }
        }
    }
    out
}

/// Maps a pair-major basis index `(m1 n1 m2 n2 ...)` of `n` qubit pairs to
/// the party-major index `(m1 m2 ... ; n1 n2 ...)`, pair 1 most significant.
pub fn pair_to_party_index(index: usize, n: usize) -> usize {
    let (mut alice, mut bob) = (0usize, 0usize);
    for k in 0..n {
        let pair = (index >> (2 * (n - 1 - k))) & 3;
        alice = (alice << 1) | (pair >> 1);
        bob = (bob << 1) | (pair & 1);
    }
    (alice << n) | bob
}

pub fn party_to_pair_index(index: usize, n: usize) -> usize {
    let alice = index >> n;
    let bob = index & ((1 << n) - 1);
    let mut out = 0usize;
    for k in 0..n {
        let m = (alice >> (n - 1 - k)) & 1;
        let b = (bob >> (n - 1 - k)) & 1;
        out = (out << 2) | (m << 1) | b;
    }
    out
}

fn pair_count_for(dim: usize, n: usize) -> Result<()> {
    if n == 0 || n > 16 || dim != 1usize << (2 * n) {
        return Err(Error::Dimension(format!(
            "order {dim} is not 4^{n} for {n} pairs"
        )));
    }
    Ok(())
}

/// Relabels a pair-major operator on `n` two-qubit pairs into party-major
/// layout, so that it reads as a bipartite operator with `dA = dB = 2^n`.
pub fn regroup_pairs_to_parties(m: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    pair_count_for(m.dim(), n)?;
    let perm: Vec<usize> = (0..m.dim()).map(|i| pair_to_party_index(i, n)).collect();
    Ok(m.permute(&perm))
}

/// Inverse of [`regroup_pairs_to_parties`].
pub fn regroup_parties_to_pairs(m: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    pair_count_for(m.dim(), n)?;
    let perm: Vec<usize> = (0..m.dim()).map(|i| party_to_pair_index(i, n)).collect();
    Ok(m.permute(&perm))
}

/// Eigenvalues sorted ascending, plus the largest off-diagonal magnitude
/// left in the rotated matrix when the sweeps stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub residual: f64,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Eigen-decomposition of a real symmetric matrix. `vectors[k]` is the
/// eigenvector for `values[k]`; values ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residual: f64,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.values.len();
        let mut out = vec![0.0; n * n];
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for r in 0..n {
                for c in 0..n {
                    out[r * n + c] += lambda * v[r] * v[c];
                }
            }
        }
        out
    }
}

fn max_off_diagonal(a: &[f64], n: usize) -> f64 {
    let mut off = 0.0f64;
    for p in 0..n {
        for q in p + 1..n {
            off = off.max(a[p * n + q].abs());
        }
    }
    off
}

/// Cyclic Jacobi on a row-major real symmetric matrix of order `n`.
///
/// Sweeps stop once every off-diagonal entry is below
/// `tol * max(1, ||A||_F)`.
pub fn jacobi_symmetric(mut a: Vec<f64>, n: usize, tol: f64) -> Result<SymmetricEigen> {
    assert_eq!(a.len(), n * n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let threshold = tol * scale;
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    let mut off = max_off_diagonal(&a, n);
    while off >= threshold {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        off = max_off_diagonal(&a, n);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    Ok(SymmetricEigen {
        values,
        vectors,
        residual: off,
        sweeps,
    })
}

/// Real symmetric embedding `[[X, -Y], [Y, X]]` of `H = X + iY`.
pub fn real_embedding(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.dim();
    let n = 2 * d;
    let mut e = vec![0.0; n * n];
    for r in 0..d {
        for c in 0..d {
            let z = m.get(r, c);
            e[r * n + c] = z.re;
            e[(r + d) * n + (c + d)] = z.re;
            e[r * n + (c + d)] = -z.im;
            e[(r + d) * n + c] = z.im;
        }
    }
    e
}

/// Reads `X + iY` back out of an embedding produced by [`real_embedding`].
pub fn from_real_embedding(e: &[f64], d: usize) -> ComplexMatrix {
    let n = 2 * d;
    ComplexMatrix::from_fn(d, |r, c| Complex64::new(e[r * n + c], e[(r + d) * n + c]))
}

/// Full Jacobi decomposition of the real embedding of a Hermitian matrix.
/// Every eigenvalue of `m` appears twice.
pub fn hermitian_embedded_eigen(m: &ComplexMatrix, tol: f64) -> Result<SymmetricEigen> {
    m.check_hermitian(HERMITIAN_TOL)?;
    jacobi_symmetric(real_embedding(&m.hermitian_part()), 2 * m.dim(), tol)
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix, tol: f64) -> Result<Spectrum> {
    assert!(tol > 0.0, "eigensolver tolerance must be positive");
    let eig = hermitian_embedded_eigen(m, tol)?;
    Ok(Spectrum {
        values: eig.values.iter().step_by(2).copied().collect(),
        residual: eig.residual,
    })
}

/// Real symmetric eigenvalues, ascending. Used for small real matrices such
/// as `T^T T`.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    Ok(jacobi_symmetric(a.to_vec(), n, EIGEN_TOL)?.values)
}
