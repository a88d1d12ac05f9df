//! Entanglement and nonlocality tools for bipartite density matrices.
//!
//! * [`separability`]: the partial transpose and the PPT separability test.
//! * [`chsh`]: correlation matrices and the exact CHSH maximum `2 sqrt(M)`.
//! * [`collective`]: postselected CHSH tests over `n` copies of a pair.
//! * [`optimizer`]: search over the local rows that drive the collective test.

pub mod acceptance;
pub mod chsh;
pub mod collective;
pub mod densemat;
pub mod error;
pub mod optimizer;
pub mod separability;
pub mod states;

pub use densemat::{ComplexMatrix, Spectrum};
pub use error::{Error, Result};
pub use states::BipartiteDensity;
