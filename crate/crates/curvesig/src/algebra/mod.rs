//! Complex polynomial and linear algebra primitives.
//!
//! Everything downstream (curve sampling, signature evaluation, path
//! tracking, monodromy) reduces to three operations implemented here:
//! evaluating/differentiating sparse polynomials over `C`, solving small
//! square complex linear systems, and finding all roots of a univariate
//! polynomial simultaneously.

mod matrix;
mod poly;
mod roots;

pub use matrix::{nullspace, numeric_rank, random_unitary, singular_values, solve_linear, Matrix};
pub use poly::{MultiPoly, PowerTable, Term};
pub use roots::univariate_roots;

use num_complex::Complex64;

/// Scalar type for all numerics: complex double precision.
pub type ComplexScalar = Complex64;

/// Relative pivot threshold under which LU elimination reports
/// [`AlgebraError::SingularMatrix`].
pub const PIVOT_EPS: f64 = 1e-13;

/// Residual target for accepted univariate roots, relative to the
/// coefficient scale of the polynomial at the root.
pub const TOL_ROOT: f64 = 1e-12;

/// Iteration cap for the simultaneous root finder.
pub const ROOT_MAX_ITERS: usize = 200;

/// Relative magnitude under which a leading coefficient is considered
/// dropped (the univariate degree is reduced before solving).
pub const LEAD_DROP_EPS: f64 = 1e-12;

/// Default relative gap separating "numerically nonzero" singular values in
/// [`numeric_rank`].
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    /// A pivot fell below `PIVOT_EPS` times the matrix scale during
    /// elimination.
    #[error("matrix is numerically singular")]
    SingularMatrix,
    /// The root finder did not reach the residual target within its
    /// iteration budget.
    #[error("root finding did not converge within {iters} iterations")]
    NoConvergence { iters: usize },
    /// Input outside the operation's domain (wrong variable count, constant
    /// polynomial where roots were requested, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Relative distance between two complex vectors: `max_i |a_i - b_i|`
/// divided by `max(1, max_i |a_i|, max_i |b_i|)`.
pub fn rel_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel_dist: length mismatch");
    let mut num: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (x, y) in a.iter().zip(b) {
        num = num.max((x - y).norm());
        scale = scale.max(x.norm()).max(y.norm());
    }
    num / scale
}
