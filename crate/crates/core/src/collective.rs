//! Collective postselection over `n` identical two-qubit pairs.
//!
//! Each party holds one qubit from every pair and applies a local unitary
//! on its `n` qubits. The qubits of pairs `2..=n` are then tested for "up"
//! (index 0) and the run is kept only if every test succeeds. Only two rows
//! of each local unitary survive the postselection, the ones indexed
//! `0 00..0` and `1 00..0`; they are carried as [`LocalRows`].
//!
//! Composite indices are big-endian with pair 1 most significant: Alice's
//! index is `a = m1 * 2^(n-1) + ... + mn`, Bob's likewise, and the joint
//! party-major index is `a * 2^n + b`.

use num_complex::Complex64;
use serde::Serialize;

use crate::densemat::{kron, regroup_pairs_to_parties, ComplexMatrix};
use crate::error::{Error, Result};
use crate::states::BipartiteDensity;

pub const ROWS_TOL: f64 = 1e-12;
pub const MAX_PAIRS: usize = 6;
/// Success probabilities below this are treated as an annihilated state.
pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-14;

/// The two retained rows of a local unitary on `n` qubits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalRows {
    n: usize,
    u0: Vec<Complex64>,
    u1: Vec<Complex64>,
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_pairs(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PAIRS {
        return Err(Error::OutOfRange(format!(
            "pair count {n} must lie in 1..={MAX_PAIRS}"
        )));
    }
    Ok(())
}

impl LocalRows {
    pub fn new(n: usize, u0: Vec<Complex64>, u1: Vec<Complex64>) -> Result<Self> {
        check_pairs(n)?;
        let len = 1usize << n;
        if u0.len() != len || u1.len() != len {
            return Err(Error::Dimension(format!(
                "rows must have {len} components, got {} and {}",
                u0.len(),
                u1.len()
            )));
        }
        let (n0, n1, overlap) = (norm(&u0), norm(&u1), inner(&u0, &u1).norm());
        if (n0 - 1.0).abs() > ROWS_TOL || (n1 - 1.0).abs() > ROWS_TOL || overlap > ROWS_TOL {
            return Err(Error::NotOrthonormal(format!(
                "|u0| = {n0}, |u1| = {n1}, |<u0,u1>| = {overlap:e}"
            )));
        }
        Ok(Self { n, u0, u1 })
    }

    pub fn from_real(n: usize, u0: &[f64], u1: &[f64]) -> Result<Self> {
        let lift = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(n, lift(u0), lift(u1))
    }

    /// Gram-Schmidt: normalize `u0`, remove its component from `u1`, then
    /// normalize `u1`. Returns `None` if either step degenerates.
    pub fn orthonormalize(n: usize, u0: &[f64], u1: &[f64]) -> Option<Self> {
        let n0 = u0.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n0 > 1e-12) {
            return None;
        }
        let u0: Vec<f64> = u0.iter().map(|x| x / n0).collect();
        let proj: f64 = u0.iter().zip(u1).map(|(a, b)| a * b).sum();
        let mut w: Vec<f64> = u1.iter().zip(&u0).map(|(b, a)| b - proj * a).collect();
        // one re-orthogonalization pass keeps the overlap at rounding level
        let proj2: f64 = u0.iter().zip(&w).map(|(a, b)| a * b).sum();
        w.iter_mut().zip(&u0).for_each(|(b, a)| *b -= proj2 * a);
        let n1 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n1 > 1e-12) {
            return None;
        }
        let w: Vec<f64> = w.iter().map(|x| x / n1).collect();
        Self::from_real(n, &u0, &w).ok()
    }

    pub fn pairs(&self) -> usize {
        self.n
    }

    pub fn row(&self, mu: usize) -> &[Complex64] {
        match mu {
            0 => &self.u0,
            1 => &self.u1,
            _ => panic!("row index {mu} out of range"),
        }
    }

    pub fn u0(&self) -> &[Complex64] {
        &self.u0
    }

    pub fn u1(&self) -> &[Complex64] {
        &self.u1
    }

    /// Real parts of `u0` followed by `u1`.
    pub fn to_real_params(&self) -> Vec<f64> {
        self.u0.iter().chain(&self.u1).map(|z| z.re).collect()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let (n0, n1) = (norm(&self.u0), norm(&self.u1));
        (n0 - 1.0)
            .abs()
            .max((n1 - 1.0).abs())
            .max(inner(&self.u0, &self.u1).norm())
    }

    /// Completes the two rows to a full `2^n x 2^n` unitary whose row `0`
    /// is `u0` and row `2^(n-1)` is `u1`, filling the others by
    /// Gram-Schmidt over `filler` vectors.
    pub fn complete_to_unitary(&self, filler: &[Vec<Complex64>]) -> Result<ComplexMatrix> {
        let len = 1usize << self.n;
        let mut basis = vec![self.u0.clone(), self.u1.clone()];
        let candidates = filler.iter().cloned().chain((0..len).map(|i| {
            let mut e = vec![Complex64::new(0.0, 0.0); len];
            e[i] = Complex64::new(1.0, 0.0);
            e
        }));
        for mut v in candidates {
            if basis.len() == len {
                break;
            }
            for _ in 0..2 {
                for u in &basis {
                    let p = inner(u, &v);
                    v.iter_mut().zip(u).for_each(|(x, a)| *x -= p * a);
                }
            }
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|z| *z /= nv);
                basis.push(v);
            }
        }
        if basis.len() != len {
            return Err(Error::Dimension("could not complete rows to a basis".into()));
        }
        // rows 0 and 2^(n-1) are the retained ones
        let half = len / 2;
        let mut order: Vec<Vec<Complex64>> = Vec::with_capacity(len);
        let mut rest = basis.drain(2..);
        for r in 0..len {
            if r == 0 {
                order.push(self.u0.clone());
            } else if r == half {
                order.push(self.u1.clone());
            } else {
                order.push(rest.next().expect("basis has 2^n vectors"));
            }
        }
        Ok(ComplexMatrix::from_fn(len, |r, c| order[r][c]))
    }
}

/// Rows with a single unit component at `00..0` (for `u0`) and `11..1`
/// (for `u1`).
pub fn xor_rows(n: usize) -> Result<LocalRows> {
    check_pairs(n)?;
    let len = 1usize << n;
    let mut u0 = vec![0.0; len];
    let mut u1 = vec![0.0; len];
    u0[0] = 1.0;
    u1[len - 1] = 1.0;
    LocalRows::from_real(n, &u0, &u1)
}

/// `V(nu, b) = (-1)^(nu + popcount(b)) U(nu, b)`: Bob's rows under the
/// Alice/Bob symmetry of the singlet.
pub fn mirror_rows(u: &LocalRows) -> LocalRows {
    let sign = |nu: usize, b: usize| {
        if (nu + b.count_ones() as usize) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let flip = |nu: usize, row: &[Complex64]| -> Vec<Complex64> {
        row.iter().enumerate().map(|(b, z)| z * sign(nu, b)).collect()
    };
    LocalRows {
        n: u.n,
        u0: flip(0, &u.u0),
        u1: flip(1, &u.u1),
    }
}

/// The same sign map as [`mirror_rows`], read as a unilateral redefinition
/// of Bob's "down" basis vector.
pub fn basis_flip_rows(v: &LocalRows) -> LocalRows {
    mirror_rows(v)
}

/// Nonzero entries of `rho (x) ... (x) rho` in party-major layout.
#[derive(Debug, Clone)]
pub struct PairPower {
    n: usize,
    entries: Vec<(u32, u32, Complex64)>,
}

impl PairPower {
    pub fn new(rho: &BipartiteDensity, n: usize) -> Result<Self> {
        if !rho.is_two_qubit() {
            return Err(Error::Dimension("pair power needs a two-qubit state".into()));
        }
        check_pairs(n)?;
        let single: Vec<(usize, usize, Complex64)> = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, rho.mat().get(r, c)))
            .filter(|(_, _, z)| z.re != 0.0 || z.im != 0.0)
            .collect();

        // (alice_row, bob_row, alice_col, bob_col, value), one pair at a time
        let mut acc: Vec<(usize, usize, usize, usize, Complex64)> =
            vec![(0, 0, 0, 0, Complex64::new(1.0, 0.0))];
        for _ in 0..n {
            let mut next = Vec::with_capacity(acc.len() * single.len());
            for &(ar, br, ac, bc, v) in &acc {
                for &(r, c, z) in &single {
                    next.push((
                        (ar << 1) | (r >> 1),
                        (br << 1) | (r & 1),
                        (ac << 1) | (c >> 1),
                        (bc << 1) | (c & 1),
                        v * z,
                    ));
                }
            }
            acc = next;
        }
        let entries = acc
            .into_iter()
            .map(|(ar, br, ac, bc, v)| (((ar << n) | br) as u32, ((ac << n) | bc) as u32, v))
            .collect();
        Ok(Self { n, entries })
    }

    pub fn pairs(&self) -> usize {
        self.n
    }

    pub fn nonzeros(&self) -> usize {
        self.entries.len()
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(1 << (2 * self.n));
        for &(r, c, v) in &self.entries {
            m[(r as usize, c as usize)] = v;
        }
        m
    }

    /// `A P A^dagger` with `A((mu,nu),(a,b)) = U(mu,a) V(nu,b)`, before
    /// renormalization.
    pub(crate) fn contract(&self, u: &LocalRows, v: &LocalRows) -> ComplexMatrix {
        let n = self.n;
        let mask = (1usize << n) - 1;
        let mut out = [Complex64::new(0.0, 0.0); 16];
        for &(r, c, val) in &self.entries {
            let (r, c) = (r as usize, c as usize);
            let (a, b) = (r >> n, r & mask);
            let (ap, bp) = (c >> n, c & mask);
            let left = [
                u.u0[a] * v.u0[b],
                u.u0[a] * v.u1[b],
                u.u1[a] * v.u0[b],
                u.u1[a] * v.u1[b],
            ];
            let right = [
                (u.u0[ap] * v.u0[bp]).conj(),
                (u.u0[ap] * v.u1[bp]).conj(),
                (u.u1[ap] * v.u0[bp]).conj(),
                (u.u1[ap] * v.u1[bp]).conj(),
            ];
            for i in 0..4 {
                let li = left[i] * val;
                if li.re == 0.0 && li.im == 0.0 {
                    continue;
                }
                for j in 0..4 {
                    out[i * 4 + j] += li * right[j];
                }
            }
        }
        ComplexMatrix::from_row_major(4, out.to_vec()).expect("finite contraction")
    }
}

/// `rho (x) ... (x) rho` over `n` pairs, party-major, as a dense matrix of
/// order `4^n`.
pub fn pair_power(rho: &BipartiteDensity, n: usize) -> Result<ComplexMatrix> {
    Ok(PairPower::new(rho, n)?.to_matrix())
}

/// Dense route to [`pair_power`]: repeated Kronecker products followed by
/// the pair-major to party-major relabeling.
pub fn pair_power_dense(rho: &BipartiteDensity, n: usize) -> Result<ComplexMatrix> {
    check_pairs(n)?;
    let mut m = rho.mat().clone();
    for _ in 1..n {
        m = kron(&m, rho.mat());
    }
    regroup_pairs_to_parties(&m, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostselectionOutcome {
    pub rho_new: BipartiteDensity,
    pub success_probability: f64,
}

fn check_rows(u: &LocalRows, v: &LocalRows, n: usize) -> Result<()> {
    if u.n != n || v.n != n {
        return Err(Error::Dimension(format!(
            "rows are for {} and {} pairs, state power has {n}",
            u.n, v.n
        )));
    }
    Ok(())
}

/// Unnormalized postselected matrix and its trace.
pub(crate) fn postselect_raw(
    power: &PairPower,
    u: &LocalRows,
    v: &LocalRows,
) -> Result<(ComplexMatrix, f64)> {
    check_rows(u, v, power.n)?;
    let raw = power.contract(u, v).hermitian_part();
    let p = raw.trace().re;
    if !(p >= MIN_SUCCESS_PROBABILITY) {
        return Err(Error::Annihilated(p));
    }
    Ok((raw.scale_real(1.0 / p), p))
}

pub fn postselect_with(power: &PairPower, u: &LocalRows, v: &LocalRows) -> Result<PostselectionOutcome> {
    let (mat, success_probability) = postselect_raw(power, u, v)?;
    Ok(PostselectionOutcome {
        rho_new: BipartiteDensity::qubits(mat)?,
        success_probability,
    })
}

/// Applies the retained rows to `n` copies of `rho`, keeps the runs where
/// every tested qubit is up, and renormalizes the surviving pair.
pub fn postselect(
    rho: &BipartiteDensity,
    n: usize,
    u: &LocalRows,
    v: &LocalRows,
) -> Result<PostselectionOutcome> {
    postselect_with(&PairPower::new(rho, n)?, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::chsh_max;
    use crate::states::{singlet, werner};
    use approx::assert_abs_diff_eq;

    fn identity_rows() -> LocalRows {
        LocalRows::from_real(1, &[1.0, 0.0], &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn xor_rows_components() {
        let r = xor_rows(2).unwrap();
        let re: Vec<f64> = r.to_real_params();
        assert_eq!(re, vec![1., 0., 0., 0., 0., 0., 0., 1.]);
        assert_eq!(r.orthonormality_defect(), 0.0);
        assert_eq!(xor_rows(1).unwrap(), identity_rows());
    }

    #[test]
    fn mirror_of_xor() {
        let u = xor_rows(2).unwrap();
        let v = mirror_rows(&u);
        assert_eq!(v.u0(), u.u0());
        let neg: Vec<Complex64> = u.u1().iter().map(|z| -z).collect();
        assert_eq!(v.u1(), neg.as_slice());
        assert_eq!(mirror_rows(&v), u);
        assert_eq!(basis_flip_rows(&u), v);
    }

    #[test]
    fn mirror_preserves_orthonormality() {
        let u = LocalRows::orthonormalize(3, &[1., 2., 3., 4., 5., 6., 7., 8.], &[8., 7., 6., 5., 4., 3., 2., 1.])
            .unwrap();
        assert!(mirror_rows(&u).orthonormality_defect() < 1e-14);
    }

    #[test]
    fn basis_flip_symmetrizes_singlet() {
        // diag(1, -1) on Bob's qubit
        let flip = kron(&ComplexMatrix::identity(2), &ComplexMatrix::diagonal(&[1.0, -1.0]));
        let s = singlet().mat().conjugate_by(&flip);
        for (r, c) in [(1, 1), (2, 2), (1, 2), (2, 1)] {
            assert_abs_diff_eq!(s.get(r, c).re, 0.5);
        }
    }

    #[test]
    fn rows_validation() {
        assert!(LocalRows::from_real(1, &[1.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(LocalRows::from_real(1, &[1.0, 0.0, 0.0], &[0.0, 1.0]).is_err());
        assert!(LocalRows::from_real(0, &[1.0], &[0.0]).is_err());
        assert!(xor_rows(7).is_err());
    }

    #[test]
    fn pair_power_matches_dense_route() {
        let rho = werner(0.3).unwrap();
        for n in 1..=3 {
            let sparse = pair_power(&rho, n).unwrap();
            let dense = pair_power_dense(&rho, n).unwrap();
            assert!(sparse.max_abs_diff(&dense) < 1e-16, "n = {n}");
            assert_abs_diff_eq!(sparse.trace().re, 1.0, epsilon = 1e-14);
        }
        assert_eq!(pair_power(&rho, 1).unwrap(), *rho.mat());
    }

    #[test]
    fn pair_power_entry_is_product() {
        let rho = werner(0.6).unwrap();
        let p = pair_power(&rho, 2).unwrap();
        // Alice (m1 m2) = 00, Bob (n1 n2) = 01 -> pair 1 is |00>, pair 2 is |01>
        let idx = 0b0001;
        assert_eq!(p.get(idx, idx), rho.mat().get(0, 0) * rho.mat().get(1, 1));
        assert_eq!(PairPower::new(&rho, 4).unwrap().nonzeros(), 6usize.pow(4));
    }

    #[test]
    fn identity_rows_leave_state_unchanged() {
        let rho = werner(0.45).unwrap();
        let out = postselect(&rho, 1, &identity_rows(), &identity_rows()).unwrap();
        assert_abs_diff_eq!(out.success_probability, 1.0, epsilon = 1e-15);
        assert!(out.rho_new.mat().max_abs_diff(rho.mat()) < 1e-15);
    }

    #[test]
    fn two_singlets_through_xor() {
        let rho = werner(1.0).unwrap();
        let u = xor_rows(2).unwrap();
        let out = postselect(&rho, 2, &u, &mirror_rows(&u)).unwrap();
        assert_abs_diff_eq!(out.success_probability, 0.5, epsilon = 1e-15);
        assert!(out.rho_new.mat().max_abs_diff(singlet().mat()) < 1e-15);
    }

    #[test]
    fn maximally_mixed_input() {
        let rho = werner(0.0).unwrap();
        let u = xor_rows(3).unwrap();
        let out = postselect(&rho, 3, &u, &mirror_rows(&u)).unwrap();
        assert!(out.rho_new.mat().max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25)) < 1e-15);
        assert_abs_diff_eq!(chsh_max(&out.rho_new).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn annihilating_rows_are_reported() {
        // |00> on both pairs, while Alice's rows have no weight on |00>
        let rho = crate::states::singlet_plus_polarized(0.0).unwrap();
        let u = LocalRows::from_real(2, &[0., 0., 0., 1.], &[0., 0., 1., 0.]).unwrap();
        assert!(matches!(postselect(&rho, 2, &u, &u), Err(Error::Annihilated(_))));
    }

    #[test]
    fn five_pair_xor_value() {
        // under XOR rows the kept state is the entrywise n-th power of rho
        let (x, n) = (0.5f64, 5);
        let (a, b, c) = ((1.0 - x) / 4.0, (1.0 + x) / 4.0, -x / 2.0);
        let (an, bn, cn) = (a.powi(n), b.powi(n), c.powi(n));
        let tz = (an - bn) / (an + bn);
        let tx = cn / (an + bn);
        let closed = 2.0 * (tz * tz + tx * tx).sqrt();

        let u = xor_rows(n as usize).unwrap();
        let out = postselect(&werner(x).unwrap(), n as usize, &u, &mirror_rows(&u)).unwrap();
        let got = chsh_max(&out.rho_new).unwrap();
        assert_abs_diff_eq!(got, closed, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 2.000873, epsilon = 5e-7);
        assert_abs_diff_eq!(out.success_probability, 2.0 * (an + bn), epsilon = 1e-15);
    }
}
