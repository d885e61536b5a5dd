//! Simultaneous univariate root finding (Aberth–Ehrlich).
//!
//! Self-contained: no companion-matrix eigensolve.  All degree-n roots are
//! iterated together from a staggered circle inside the Cauchy bound, with a
//! final per-root Newton polish.  Deterministic for a given input — the
//! initial configuration is fixed, not drawn from an RNG — so seeded callers
//! stay reproducible end to end.

use num_complex::Complex64;

use super::{AlgebraError, MultiPoly, LEAD_DROP_EPS, ROOT_MAX_ITERS, TOL_ROOT};

/// All complex roots (with multiplicity) of a univariate polynomial.
///
/// Near-zero leading coefficients (relative magnitude below
/// [`LEAD_DROP_EPS`]) are dropped before solving; a polynomial that is
/// constant after dropping is rejected as invalid input.  Multiple roots come
/// back as clusters at the residual tolerance scale.
pub fn univariate_roots(p: &MultiPoly) -> Result<Vec<Complex64>, AlgebraError> {
    if p.nvars() != 1 {
        return Err(AlgebraError::InvalidInput(format!(
            "univariate_roots requires 1 variable, got {}",
            p.nvars()
        )));
    }
    let coeffs = p.univariate_coeffs();
    roots_from_coeffs(&coeffs)
}

/// Root solve on a dense ascending coefficient vector.
pub(crate) fn roots_from_coeffs(coeffs: &[Complex64]) -> Result<Vec<Complex64>, AlgebraError> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(AlgebraError::InvalidInput("zero polynomial".into()));
    }
    let mut c: Vec<Complex64> = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() <= LEAD_DROP_EPS * scale {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Err(AlgebraError::InvalidInput(
            "constant polynomial has no roots".into(),
        ));
    }

    // Initial guesses: staggered circle at the Cauchy root bound.  The fixed
    // angular offset breaks coefficient symmetries (real polynomials, pure
    // powers) that would otherwise trap the iteration.
    let lead = *c.last().unwrap();
    let radius = 1.0 + c[..n].iter().map(|v| (v / lead).norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64 + 0.25) / n as f64 + 0.7390851;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut converged = vec![false; n];
    for _ in 0..ROOT_MAX_ITERS {
        let mut moved = 0.0f64;
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let (pv, dv) = horner_with_derivative(&c, z[i]);
            if accept(&c, z[i], pv) {
                converged[i] = true;
                continue;
            }
            let newton = if dv.norm() > 0.0 {
                pv / dv
            } else {
                // Stationary point: nudge off it.
                z[i] += Complex64::new(1e-6 * radius, 1e-6 * radius);
                continue;
            };
            let mut repulsion = Complex64::default();
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    let d = z[i] - zj;
                    if d.norm() > 0.0 {
                        repulsion += d.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() > 1e-300 { newton / denom } else { newton };
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if converged.iter().all(|&b| b) || moved < 1e-16 * radius.max(1.0) {
            break;
        }
    }

    // Newton polish, then verify every root meets the residual target.
    for zi in z.iter_mut() {
        for _ in 0..5 {
            let (pv, dv) = horner_with_derivative(&c, *zi);
            if accept(&c, *zi, pv) || dv.norm() == 0.0 {
                break;
            }
            *zi -= pv / dv;
        }
    }
    for &zi in &z {
        let (pv, _) = horner_with_derivative(&c, zi);
        if !accept(&c, zi, pv) {
            return Err(AlgebraError::NoConvergence { iters: ROOT_MAX_ITERS });
        }
    }
    Ok(z)
}

/// Backward-error acceptance: |p(z)| measured against the coefficient scale
/// accumulated at |z| (so large roots are not rejected for honest roundoff).
fn accept(c: &[Complex64], z: Complex64, pv: Complex64) -> bool {
    let zn = z.norm();
    let mut s = 0.0;
    let mut zp = 1.0;
    for v in c {
        s += v.norm() * zp;
        zp *= zn;
    }
    pv.norm() <= TOL_ROOT * s.max(f64::MIN_POSITIVE)
}

fn horner_with_derivative(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::default();
    let mut d = Complex64::default();
    for &ck in c.iter().rev() {
        d = d * z + p;
        p = p * z + ck;
    }
    (p, d)
}
