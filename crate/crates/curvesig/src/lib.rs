//! Numerical decision procedures for complex plane algebraic curves.
//!
//! The crate decides whether two curves `V(f)`, `V(g)` in `C^2` are related by
//! a complex Euclidean motion, and classifies the Euclidean symmetry group of
//! a single curve, by comparing the images of *signature maps*: rational maps
//! built from curvature-type invariants or from pairwise squared distances of
//! point tuples.  Images are compared numerically through pseudowitness sets
//! (populated by monodromy) and homotopy continuation of a start tuple into a
//! target slice, followed by a membership test — an equality test that is
//! correct with probability one.
//!
//! Module map:
//!
//! * [`algebra`] — sparse multivariate polynomials over `C`, dense complex
//!   matrices, simultaneous univariate root finding.
//! * [`curves`] — plane curves with cached partials, point sampling and
//!   refinement, affine transforms.
//! * [`groups`] — complex Euclidean and equi-affine motions, moving frames,
//!   element recovery from matched tuples.
//! * [`sigmaps`] — the four signature maps and their Jacobians.
//! * [`tracking`] — predictor/corrector path tracking for square homotopies.
//! * [`witness`] — slices, incidence seeding, monodromy population,
//!   pseudowitness sets and membership.
//! * [`equivalence`] — the equality test and symmetry group analysis.

pub mod algebra;
pub mod curves;
pub mod equivalence;
pub mod groups;
pub mod rng;
pub mod sigmaps;
pub mod tracking;
mod wire;
pub mod witness;

pub use algebra::ComplexScalar;
