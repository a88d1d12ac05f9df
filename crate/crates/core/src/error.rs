use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: |M({row},{col}) - conj(M({col},{row}))| = {defect:e}")]
    NotHermitian { row: usize, col: usize, defect: f64 },

    #[error("matrix is not unitary: max |U U^dagger - I| = {defect:e}")]
    NotUnitary { defect: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains a non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("amplitudes are not normalized: |a|^2 + |b|^2 = {0}")]
    Unnormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("rows are not orthonormal: {0}")]
    NotOrthonormal(String),

    #[error("postselection annihilates the state (success probability {0:e})")]
    Annihilated(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
