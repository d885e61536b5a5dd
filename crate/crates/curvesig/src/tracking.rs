//! Predictor–corrector path tracking for square homotopies.
//!
//! A homotopy `H(x; t)` with `H(x0; 0) = 0` implicitly defines a solution
//! path `x(t)`; differentiating gives the Davidenko ODE
//! `x'(t) = -H_x(x, t)^{-1} H_t(x, t)`.  [`track`] follows one path from
//! `t = 0` to `t = 1` with an RK4 predictor on that ODE and a full Newton
//! corrector at each accepted `t`, halving the step on corrector failure
//! and growing it again after a run of easy steps.  Tracking is
//! single-path and pure: concurrent paths over one shared system need no
//! coordination, and aggregation is the caller's job.
//!
//! Two concrete systems are assembled here, both square over the `2k`
//! flattened coordinates of a `k`-point tuple:
//!
//! * [`build_equality_homotopy`] — the curve is fixed and an affine slice
//!   of the signature image moves from one position to another.  Tracking
//!   it translates "is this signature value on that image?" into "does
//!   this path land on a stored witness point?".
//! * [`build_parameter_homotopy`] — the defining polynomial moves along
//!   the coefficient pencil `(1 - t) f0 + t f1` while the slice stays
//!   put, transporting witness tuples from one curve to another.  The
//!   monodromy variant [`build_monodromy_leg`] moves curve and slices
//!   simultaneously.
//!
//! Paths are allowed to fail — near-singular Jacobians, guard poles of the
//! signature coordinates, or escapes to infinity all surface as explicit
//! [`PathStatus`] values, never as silently wrong endpoints.  There are no
//! singular-endpoint endgames: callers rely on generic parameters making
//! singular endpoints probability-zero, and drop the occasional failure.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{solve_linear, Matrix};
use crate::curves::{Curve, CurvePoint};
use crate::sigmaps::{jet_eval, SignatureMap};
use crate::witness::Slice;

/// A path whose norm exceeds this is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// Default arc constant for coefficient-pencil homotopies.  The straight
/// real segment between a curve and a closely related one (its own motion,
/// say) can pass arbitrarily near a singular member of the pencil; routing
/// the interpolation parameter along `t(s) = γs / (1 + (γ-1)s)` keeps the
/// endpoints `t(0) = 0`, `t(1) = 1` but bulges the interior into the
/// complex plane, where the bad parameter values are isolated points missed
/// with probability one.  Slice-motion homotopies have independent generic
/// endpoints and keep `γ = 1` (the identity reparameterization).
pub const PENCIL_GAMMA: Complex64 = Complex64::new(0.6, 0.8);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrackError {
    /// Assembled equation rows do not match the variable count, or slice
    /// shapes disagree.
    DimensionMismatch { detail: String },
    /// Settings violate `0 < dt_min <= dt_init <= dt_max <= 0.5` or a
    /// tolerance is not positive.
    BadSettings { detail: String },
}

impl std::fmt::Display for TrackError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrackError::DimensionMismatch { detail } => {
                write!(f, "homotopy dimension mismatch: {detail}")
            }
            TrackError::BadSettings { detail } => write!(f, "bad tracker settings: {detail}"),
        }
    }
}

impl std::error::Error for TrackError {}

/// One evaluation of a square system: residual, spatial Jacobian, and the
/// derivative in the homotopy parameter.
#[derive(Debug, Clone)]
pub struct SysEval {
    pub residual: Vec<Complex64>,
    pub jac_x: Matrix,
    pub jac_t: Vec<Complex64>,
}

/// A square polynomial/rational system `H(x; t)` with as many equations as
/// variables.
pub trait SquareSystem: Sync {
    /// Number of variables (= number of equations).
    fn dim(&self) -> usize;

    /// Evaluate residual and both Jacobians at `(x, t)`.  `None` means the
    /// point hit a pole or guard of the system's coordinate functions; the
    /// tracker treats it as a failed step, not an error.
    fn eval(&self, x: &[Complex64], t: f64) -> Option<SysEval>;

    fn residual(&self, x: &[Complex64], t: f64) -> Option<Vec<Complex64>> {
        self.eval(x, t).map(|e| e.residual)
    }
}

/// Step-size and convergence policy for [`track`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSettings {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub endpoint_tol: f64,
    pub max_newton_iters: usize,
    pub max_steps: usize,
    pub step_grow: f64,
    pub step_shrink: f64,
}

impl Default for TrackerSettings {
    fn default() -> Self {
        TrackerSettings {
            dt_init: 0.05,
            dt_min: 1e-6,
            dt_max: 0.2,
            newton_tol: 1e-10,
            endpoint_tol: 1e-10,
            max_newton_iters: 8,
            max_steps: 10_000,
            step_grow: 2.0,
            step_shrink: 0.5,
        }
    }
}

impl TrackerSettings {
    pub fn validate(&self) -> Result<(), TrackError> {
        let ok_dt = 0.0 < self.dt_min
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max <= 0.5;
        if !ok_dt {
            return Err(TrackError::BadSettings {
                detail: format!(
                    "need 0 < dt_min <= dt_init <= dt_max <= 0.5, got {} / {} / {}",
                    self.dt_min, self.dt_init, self.dt_max
                ),
            });
        }
        if self.newton_tol <= 0.0 || self.endpoint_tol <= 0.0 {
            return Err(TrackError::BadSettings { detail: "tolerances must be positive".into() });
        }
        if self.max_newton_iters == 0 || self.max_steps == 0 {
            return Err(TrackError::BadSettings { detail: "iteration budgets must be positive".into() });
        }
        if self.step_grow < 1.0 || !(0.0 < self.step_shrink && self.step_shrink < 1.0) {
            return Err(TrackError::BadSettings {
                detail: "need step_grow >= 1 and 0 < step_shrink < 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathStatus {
    Success,
    Diverged,
    StepFailure,
    SingularJacobian,
}

/// Outcome of tracking one path.
#[derive(Debug, Clone)]
pub struct PathResult {
    pub status: PathStatus,
    /// `x(1)`, present only on success.
    pub endpoint: Option<Vec<Complex64>>,
    pub steps_taken: usize,
    /// Largest corrected residual seen over accepted steps.
    pub max_residual_seen: f64,
}

impl PathResult {
    fn failed(status: PathStatus, steps: usize, max_res: f64) -> PathResult {
        PathResult { status, endpoint: None, steps_taken: steps, max_residual_seen: max_res }
    }
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

enum NewtonOutcome {
    Converged { x: Vec<Complex64>, res: f64, iters: usize },
    NoConverge,
    Singular,
}

/// Newton-correct `x` on `H(., t) = 0`.
fn newton(
    sys: &dyn SquareSystem,
    mut x: Vec<Complex64>,
    t: f64,
    tol: f64,
    max_iters: usize,
) -> NewtonOutcome {
    for it in 0..=max_iters {
        let Some(e) = sys.eval(&x, t) else {
            return NewtonOutcome::NoConverge;
        };
        let res = inf_norm(&e.residual);
        if res <= tol {
            return NewtonOutcome::Converged { x, res, iters: it };
        }
        if it == max_iters {
            break;
        }
        let rhs: Vec<Complex64> = e.residual.iter().map(|z| -z).collect();
        let Ok(delta) = solve_linear(&e.jac_x, &rhs) else {
            return NewtonOutcome::Singular;
        };
        for (xi, di) in x.iter_mut().zip(&delta) {
            *xi += di;
        }
        if inf_norm(&x) > DIVERGENCE_BOUND {
            return NewtonOutcome::NoConverge;
        }
    }
    NewtonOutcome::NoConverge
}

enum Slope {
    Ok(Vec<Complex64>),
    Guard,
    Singular,
}

/// Davidenko slope `-H_x^{-1} H_t` at `(x, t)`.
fn slope(sys: &dyn SquareSystem, x: &[Complex64], t: f64) -> Slope {
    let Some(e) = sys.eval(x, t) else {
        return Slope::Guard;
    };
    let rhs: Vec<Complex64> = e.jac_t.iter().map(|z| -z).collect();
    match solve_linear(&e.jac_x, &rhs) {
        Ok(v) => Slope::Ok(v),
        Err(_) => Slope::Singular,
    }
}

fn axpy(x: &[Complex64], a: f64, v: &[Complex64]) -> Vec<Complex64> {
    x.iter().zip(v).map(|(xi, vi)| xi + a * vi).collect()
}

/// RK4 predictor for the step `t -> t + dt`.  `Err` carries whether a
/// singular linear solve (rather than a guard pole) broke the step.
fn rk4_predict(
    sys: &dyn SquareSystem,
    x: &[Complex64],
    t: f64,
    dt: f64,
) -> Result<Vec<Complex64>, bool> {
    let stage = |xs: &[Complex64], ts: f64| match slope(sys, xs, ts) {
        Slope::Ok(v) => Ok(v),
        Slope::Guard => Err(false),
        Slope::Singular => Err(true),
    };
    let k1 = stage(x, t)?;
    let k2 = stage(&axpy(x, dt / 2.0, &k1), t + dt / 2.0)?;
    let k3 = stage(&axpy(x, dt / 2.0, &k2), t + dt / 2.0)?;
    let k4 = stage(&axpy(x, dt, &k3), t + dt)?;
    let mut out = x.to_vec();
    for i in 0..x.len() {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Track one solution path of `sys` from `x0` at `t = 0` to `t = 1`.
///
/// `x0` must satisfy `H(x0; 0) = 0` to `newton_tol` (it is polished once
/// before stepping).  On success the endpoint is Newton-polished to
/// `endpoint_tol`.
pub fn track(sys: &dyn SquareSystem, x0: &[Complex64], settings: &TrackerSettings) -> PathResult {
    debug_assert!(settings.validate().is_ok(), "invalid tracker settings");
    assert_eq!(x0.len(), sys.dim(), "start point dimension mismatch");

    let (mut x, mut max_res) =
        match newton(sys, x0.to_vec(), 0.0, settings.newton_tol, settings.max_newton_iters) {
            NewtonOutcome::Converged { x, res, .. } => (x, res),
            NewtonOutcome::Singular => {
                return PathResult::failed(PathStatus::SingularJacobian, 0, 0.0)
            }
            NewtonOutcome::NoConverge => return PathResult::failed(PathStatus::StepFailure, 0, 0.0),
        };

    let mut t = 0.0f64;
    let mut dt = settings.dt_init;
    let mut steps = 0usize;
    let mut easy_run = 0usize;

    let failure_status = |singular: bool| {
        if singular {
            PathStatus::SingularJacobian
        } else {
            PathStatus::StepFailure
        }
    };

    while t < 1.0 {
        if steps >= settings.max_steps {
            return PathResult::failed(PathStatus::StepFailure, steps, max_res);
        }
        let dt_eff = dt.min(1.0 - t);

        let predicted = match rk4_predict(sys, &x, t, dt_eff) {
            Ok(p) => p,
            Err(singular) => {
                easy_run = 0;
                dt *= settings.step_shrink;
                if dt < settings.dt_min {
                    return PathResult::failed(failure_status(singular), steps, max_res);
                }
                continue;
            }
        };

        match newton(sys, predicted, t + dt_eff, settings.newton_tol, settings.max_newton_iters) {
            NewtonOutcome::Converged { x: corrected, res, iters } => {
                x = corrected;
                t += dt_eff;
                steps += 1;
                max_res = max_res.max(res);
                if inf_norm(&x) > DIVERGENCE_BOUND {
                    return PathResult::failed(PathStatus::Diverged, steps, max_res);
                }
                if iters <= 2 {
                    easy_run += 1;
                    if easy_run >= 3 {
                        dt = (dt * settings.step_grow).min(settings.dt_max);
                        easy_run = 0;
                    }
                } else {
                    easy_run = 0;
                }
            }
            outcome => {
                easy_run = 0;
                dt *= settings.step_shrink;
                if dt < settings.dt_min {
                    let singular = matches!(outcome, NewtonOutcome::Singular);
                    return PathResult::failed(failure_status(singular), steps, max_res);
                }
            }
        }
    }

    // Endpoint polish to the (tighter) endpoint tolerance.
    match newton(sys, x, 1.0, settings.endpoint_tol, 2 * settings.max_newton_iters) {
        NewtonOutcome::Converged { x, res, .. } => {
            if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return PathResult::failed(PathStatus::Diverged, steps, max_res);
            }
            PathResult {
                status: PathStatus::Success,
                endpoint: Some(x),
                steps_taken: steps,
                max_residual_seen: max_res.max(res),
            }
        }
        NewtonOutcome::Singular => PathResult::failed(PathStatus::SingularJacobian, steps, max_res),
        NewtonOutcome::NoConverge => PathResult::failed(PathStatus::StepFailure, steps, max_res),
    }
}

// --- assembled signature homotopies -------------------------------------------

/// Square system over the flattened tuple variables of a signature map:
/// `k` on-curve rows (the defining polynomial, possibly moving along a
/// coefficient pencil), domain-slice rows over the tuple variables, and
/// image-slice rows composed with the signature map.  Slices interpolate
/// linearly from their `0` to their `1` position.
pub struct SignatureHomotopy {
    map: SignatureMap,
    /// Pencil target; `None` keeps the curve fixed.
    target: Option<Curve>,
    dom0: Slice,
    dom1: Slice,
    img0: Slice,
    img1: Slice,
    /// Complex-arc constant; see [`PENCIL_GAMMA`].
    gamma: Complex64,
}

impl SignatureHomotopy {
    fn validated(self) -> Result<Self, TrackError> {
        let k = self.map.arity();
        let m = self.map.ambient_dim();
        let mismatch = |detail: String| TrackError::DimensionMismatch { detail };
        if self.dom0.rows() != self.dom1.rows() || self.img0.rows() != self.img1.rows() {
            return Err(mismatch("slice endpoints have different row counts".into()));
        }
        if self.dom0.ambient() != 2 * k || self.dom1.ambient() != 2 * k {
            return Err(mismatch(format!(
                "domain slice ambient {} != {}",
                self.dom0.ambient(),
                2 * k
            )));
        }
        if self.img0.ambient() != m || self.img1.ambient() != m {
            return Err(mismatch(format!("image slice ambient {} != {m}", self.img0.ambient())));
        }
        let total = k + self.dom0.rows() + self.img0.rows();
        if total != 2 * k {
            return Err(mismatch(format!("{total} equations over {} variables", 2 * k)));
        }
        if let Some(t) = &self.target {
            if t.degree() != self.map.curve().degree() {
                return Err(mismatch(format!(
                    "pencil endpoints have degrees {} and {}",
                    self.map.curve().degree(),
                    t.degree()
                )));
            }
        }
        Ok(self)
    }

    pub fn map(&self) -> &SignatureMap {
        &self.map
    }

    /// Override the interpolation arc constant.
    pub fn with_gamma(mut self, gamma: Complex64) -> Self {
        self.gamma = gamma;
        self
    }
}

fn lerp_c(a: Complex64, b: Complex64, t: Complex64) -> Complex64 {
    a + t * (b - a)
}

/// Rescale the defining polynomial to unit coefficient scale.  The zero set
/// is unchanged, but pencil rows between two curves of wildly different
/// coefficient magnitudes (a curve and its image under a large complex
/// motion, say) become numerically balanced — without this, the assembled
/// Jacobian's conditioning is hostage to the motion's size.
fn unit_scale(curve: &Curve) -> Curve {
    let s = curve.coeff_scale();
    Curve::new(curve.poly().scale(Complex64::new(1.0 / s, 0.0)))
        .expect("uniform scaling preserves the degree")
}

impl SquareSystem for SignatureHomotopy {
    fn dim(&self) -> usize {
        2 * self.map.arity()
    }

    fn eval(&self, x: &[Complex64], s: f64) -> Option<SysEval> {
        let k = self.map.arity();
        let m = self.map.ambient_dim();
        let n = 2 * k;
        debug_assert_eq!(x.len(), n);

        // Reparameterize along the complex arc t(s); for gamma = 1 this is
        // the identity with dt/ds = 1.
        let denom = 1.0 + (self.gamma - 1.0) * s;
        let t = self.gamma * s / denom;
        let dt_ds = self.gamma / (denom * denom);

        let mut residual = Vec::with_capacity(n);
        let mut jac_x = Matrix::zeros(n, n);
        let mut jac_t = vec![Complex64::default(); n];
        let curve = self.map.curve();

        // On-curve rows, one per tuple point.
        for i in 0..k {
            let p = CurvePoint::new(x[2 * i], x[2 * i + 1]);
            let (gx0, gy0) = curve.gradient(&p);
            let f0 = curve.eval(&p);
            match &self.target {
                None => {
                    residual.push(f0);
                    jac_x[(i, 2 * i)] = gx0;
                    jac_x[(i, 2 * i + 1)] = gy0;
                }
                Some(c1) => {
                    let f1 = c1.eval(&p);
                    let (gx1, gy1) = c1.gradient(&p);
                    residual.push(lerp_c(f0, f1, t));
                    jac_x[(i, 2 * i)] = lerp_c(gx0, gx1, t);
                    jac_x[(i, 2 * i + 1)] = lerp_c(gy0, gy1, t);
                    jac_t[i] = (f1 - f0) * dt_ds;
                }
            }
        }

        // Domain-slice rows: affine in the tuple variables.
        for r in 0..self.dom0.rows() {
            let row = k + r;
            let mut res = lerp_c(self.dom0.constants()[r], self.dom1.constants()[r], t);
            let mut dres_dt = self.dom1.constants()[r] - self.dom0.constants()[r];
            for v in 0..n {
                let a0 = self.dom0.coeffs()[(r, v)];
                let a1 = self.dom1.coeffs()[(r, v)];
                let at = lerp_c(a0, a1, t);
                res += at * x[v];
                dres_dt += (a1 - a0) * x[v];
                jac_x[(row, v)] = at;
            }
            residual.push(res);
            jac_t[row] = dres_dt * dt_ds;
        }

        // Image-slice rows: affine in the signature coordinates, chained
        // through the map's jet.
        if self.img0.rows() > 0 {
            let pencil = self.target.as_ref().map(|c1| (c1, t));
            let jet = jet_eval(self.map.id(), curve, pencil, x).ok()?;
            for r in 0..self.img0.rows() {
                let row = k + self.dom0.rows() + r;
                let mut res = lerp_c(self.img0.constants()[r], self.img1.constants()[r], t);
                let mut dres_dt = self.img1.constants()[r] - self.img0.constants()[r];
                for j in 0..m {
                    let b0 = self.img0.coeffs()[(r, j)];
                    let b1 = self.img1.coeffs()[(r, j)];
                    let bt = lerp_c(b0, b1, t);
                    res += bt * jet.values[j];
                    dres_dt += (b1 - b0) * jet.values[j] + bt * jet.dt[j];
                    for v in 0..n {
                        jac_x[(row, v)] += bt * jet.dx[(j, v)];
                    }
                }
                residual.push(res);
                jac_t[row] = dres_dt * dt_ds;
            }
        }

        Some(SysEval { residual, jac_x, jac_t })
    }
}

/// Fixed curve, moving image slice `img0 -> img1`, fixed domain slice.
/// Row count must balance: `k + dom.rows + img.rows = 2k`.
pub fn build_equality_homotopy(
    map: &SignatureMap,
    dom: &Slice,
    img0: &Slice,
    img1: &Slice,
) -> Result<SignatureHomotopy, TrackError> {
    SignatureHomotopy {
        map: SignatureMap::build(map.id(), &unit_scale(map.curve())),
        target: None,
        dom0: dom.clone(),
        dom1: dom.clone(),
        img0: img0.clone(),
        img1: img1.clone(),
        gamma: Complex64::new(1.0, 0.0),
    }
    .validated()
}

/// Moving curve (coefficient pencil from the map's curve to `target`),
/// fixed slices.
pub fn build_parameter_homotopy(
    map: &SignatureMap,
    target: &Curve,
    dom: &Slice,
    img: &Slice,
) -> Result<SignatureHomotopy, TrackError> {
    SignatureHomotopy {
        map: SignatureMap::build(map.id(), &unit_scale(map.curve())),
        target: Some(unit_scale(target)),
        dom0: dom.clone(),
        dom1: dom.clone(),
        img0: img.clone(),
        img1: img.clone(),
        gamma: PENCIL_GAMMA,
    }
    .validated()
}

/// Moving curve *and* moving slices: one leg of a monodromy loop.
pub fn build_monodromy_leg(
    map: &SignatureMap,
    target: &Curve,
    dom0: &Slice,
    dom1: &Slice,
    img0: &Slice,
    img1: &Slice,
) -> Result<SignatureHomotopy, TrackError> {
    SignatureHomotopy {
        map: SignatureMap::build(map.id(), &unit_scale(map.curve())),
        target: Some(unit_scale(target)),
        dom0: dom0.clone(),
        dom1: dom1.clone(),
        img0: img0.clone(),
        img1: img1.clone(),
        gamma: PENCIL_GAMMA,
    }
    .validated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{rel_dist, univariate_roots, MultiPoly};
    use crate::curves::{random_curve, sample_regular_tuple, transform, Tuple};
    use crate::groups::GroupElement;
    use crate::rng::subseed;
    use crate::sigmaps::{flatten, MapId};
    use crate::witness::{random_slice, Slice};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense linear homotopy `(1-t)(A0 x - b0) + t(A1 x - b1)`.
    struct LinearHomotopy {
        a0: Matrix,
        b0: Vec<Complex64>,
        a1: Matrix,
        b1: Vec<Complex64>,
    }

    impl SquareSystem for LinearHomotopy {
        fn dim(&self) -> usize {
            self.b0.len()
        }
        fn eval(&self, x: &[Complex64], t: f64) -> Option<SysEval> {
            let n = self.dim();
            let r0 = self.a0.mul_vec(x);
            let r1 = self.a1.mul_vec(x);
            let mut residual = Vec::with_capacity(n);
            let mut jac_x = Matrix::zeros(n, n);
            let mut jac_t = Vec::with_capacity(n);
            for i in 0..n {
                let at0 = r0[i] - self.b0[i];
                let at1 = r1[i] - self.b1[i];
                residual.push(lerp(at0, at1, t));
                jac_t.push(at1 - at0);
                for j in 0..n {
                    jac_x[(i, j)] = lerp(self.a0[(i, j)], self.a1[(i, j)], t);
                }
            }
            Some(SysEval { residual, jac_x, jac_t })
        }
    }

    fn random_linear(n: usize, seed: u64) -> (Matrix, Vec<Complex64>) {
        let mut rng = crate::rng::seeded(seed);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = crate::rng::complex_unit(&mut rng);
            }
        }
        let b = (0..n).map(|_| crate::rng::complex_unit(&mut rng)).collect();
        (a, b)
    }

    #[test]
    fn linear_homotopy_reaches_the_target_solution() {
        for s in 0..20u64 {
            let (a0, b0) = random_linear(3, subseed(100, 2 * s));
            let (a1, b1) = random_linear(3, subseed(100, 2 * s + 1));
            let x0 = solve_linear(&a0, &b0).unwrap();
            let x1 = solve_linear(&a1, &b1).unwrap();
            let sys = LinearHomotopy { a0, b0, a1, b1 };
            let res = track(&sys, &x0, &TrackerSettings::default());
            assert_eq!(res.status, PathStatus::Success, "seed {s}");
            assert!(rel_dist(&res.endpoint.unwrap(), &x1) <= 1e-10, "seed {s}");
        }
    }

    /// `x^2 = 0.5 - t`: the two square-root branches collide at `t = 0.5`
    /// and continue imaginary.  A real-arithmetic-safe tracker cannot pass
    /// the branch point; the failure must be reported, never skipped.
    struct BranchPoint;

    impl SquareSystem for BranchPoint {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[Complex64], t: f64) -> Option<SysEval> {
            let residual = vec![x[0] * x[0] - (0.5 - t)];
            let mut jac_x = Matrix::zeros(1, 1);
            jac_x[(0, 0)] = 2.0 * x[0];
            Some(SysEval { residual, jac_x, jac_t: vec![c(1.0, 0.0)] })
        }
    }

    #[test]
    fn branch_point_collision_is_reported_not_skipped() {
        let res = track(&BranchPoint, &[c(0.5f64.sqrt(), 0.0)], &TrackerSettings::default());
        assert!(
            matches!(res.status, PathStatus::StepFailure | PathStatus::SingularJacobian),
            "got {:?}",
            res.status
        );
        assert!(res.endpoint.is_none());
    }

    /// `(1-t)(x - 1) - t = 0` has solution `x = 1/(1-t)`, which escapes to
    /// infinity as `t -> 1`: the leading coefficient dies at the endpoint.
    struct EscapeToInfinity;

    impl SquareSystem for EscapeToInfinity {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[Complex64], t: f64) -> Option<SysEval> {
            let residual = vec![(1.0 - t) * (x[0] - 1.0) - t];
            let mut jac_x = Matrix::zeros(1, 1);
            jac_x[(0, 0)] = c(1.0 - t, 0.0);
            Some(SysEval { residual, jac_x, jac_t: vec![-x[0]] })
        }
    }

    #[test]
    fn escaping_path_is_flagged_divergent() {
        let res = track(&EscapeToInfinity, &[c(1.0, 0.0)], &TrackerSettings::default());
        assert!(
            matches!(res.status, PathStatus::Diverged | PathStatus::StepFailure),
            "got {:?}",
            res.status
        );
    }

    #[test]
    fn settings_validation_rejects_bad_ranges() {
        let mut s = TrackerSettings::default();
        assert!(s.validate().is_ok());
        s.dt_min = 0.3;
        assert!(matches!(s.validate(), Err(TrackError::BadSettings { .. })));
        let mut s = TrackerSettings::default();
        s.newton_tol = 0.0;
        assert!(s.validate().is_err());
        let mut s = TrackerSettings::default();
        s.dt_max = 0.7;
        assert!(s.validate().is_err());
    }

    #[test]
    fn settings_deserialize_with_partial_fields() {
        let s: TrackerSettings = serde_json::from_str(r#"{"dt_init": 0.02}"#).unwrap();
        assert_eq!(s.dt_init, 0.02);
        assert_eq!(s.max_steps, TrackerSettings::default().max_steps);
        assert!(serde_json::from_str::<TrackerSettings>(r#"{"bogus": 1}"#).is_err());
    }

    // --- quartic ∩ moving line ------------------------------------------------

    fn lerp(a: Complex64, b: Complex64, t: f64) -> Complex64 {
        a + t * (b - a)
    }

    /// Intersection of a fixed quartic with a line moving from `l0` to
    /// `l1`; the four intersection points are trackable paths whose
    /// endpoints an exact univariate computation can check.
    struct CurveLine {
        curve: Curve,
        l0: [Complex64; 3], // a x + b y + c
        l1: [Complex64; 3],
    }

    impl SquareSystem for CurveLine {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &[Complex64], t: f64) -> Option<SysEval> {
            let p = CurvePoint::new(x[0], x[1]);
            let (gx, gy) = self.curve.gradient(&p);
            let line =
                |l: &[Complex64; 3]| l[0] * x[0] + l[1] * x[1] + l[2];
            let mut jac_x = Matrix::zeros(2, 2);
            jac_x[(0, 0)] = gx;
            jac_x[(0, 1)] = gy;
            jac_x[(1, 0)] = lerp(self.l0[0], self.l1[0], t);
            jac_x[(1, 1)] = lerp(self.l0[1], self.l1[1], t);
            Some(SysEval {
                residual: vec![self.curve.eval(&p), lerp(line(&self.l0), line(&self.l1), t)],
                jac_x,
                jac_t: vec![Complex64::default(), line(&self.l1) - line(&self.l0)],
            })
        }
    }

    /// Substitute the line `a x + b y + c = 0` (generic `b`) into the curve
    /// and return the intersection points via exact univariate root
    /// finding.
    fn line_curve_points(curve: &Curve, l: &[Complex64; 3]) -> Vec<CurvePoint> {
        // y = -(a x + c)/b
        let x_form = MultiPoly::variable(1, 0);
        let y_form = MultiPoly::from_terms(1, [(vec![1], -l[0] / l[1]), (vec![0], -l[2] / l[1])]);
        let restricted = curve.poly().compose(&[x_form, y_form]);
        univariate_roots(&restricted)
            .unwrap()
            .into_iter()
            .map(|x| CurvePoint::new(x, -(l[0] * x + l[2]) / l[1]))
            .collect()
    }

    fn match_as_sets(a: &[Vec<Complex64>], b: &[Vec<Complex64>], tol: f64) -> bool {
        a.len() == b.len()
            && a.iter().all(|p| b.iter().any(|q| rel_dist(p, q) <= tol))
            && b.iter().all(|q| a.iter().any(|p| rel_dist(p, q) <= tol))
    }

    #[test]
    fn quartic_line_homotopy_endpoints_match_exact_roots() {
        let curve = random_curve(4, 321);
        let mut rng = crate::rng::seeded(322);
        let mut line = || {
            [
                crate::rng::complex_unit(&mut rng),
                crate::rng::complex_unit(&mut rng),
                crate::rng::complex_unit(&mut rng),
            ]
        };
        let (l0, l1) = (line(), line());
        let starts = line_curve_points(&curve, &l0);
        let want: Vec<Vec<Complex64>> = line_curve_points(&curve, &l1)
            .iter()
            .map(|p| vec![p.x, p.y])
            .collect();
        assert_eq!(starts.len(), 4);

        let sys = CurveLine { curve, l0, l1 };
        let settings = TrackerSettings::default();
        let mut got = Vec::new();
        for p in &starts {
            let res = track(&sys, &[p.x, p.y], &settings);
            assert_eq!(res.status, PathStatus::Success);
            got.push(res.endpoint.unwrap());
        }
        assert!(match_as_sets(&got, &want, 1e-8), "endpoint sets differ");

        // Path-crossing detector: halving the initial step must land on
        // the same endpoint set.
        let halved = TrackerSettings { dt_init: settings.dt_init / 2.0, ..settings };
        let mut got2 = Vec::new();
        for p in &starts {
            let res = track(&sys, &[p.x, p.y], &halved);
            assert_eq!(res.status, PathStatus::Success);
            got2.push(res.endpoint.unwrap());
        }
        assert!(match_as_sets(&got, &got2, 1e-8), "dt sensitivity");
    }

    // --- assembled signature homotopies ----------------------------------------

    /// Start data for an assembled homotopy: a regular tuple plus slices
    /// through its signature value, sized so the system is square.
    fn start_data(map: &SignatureMap, seed: u64) -> (Tuple, Slice, Slice) {
        let k = map.arity();
        let d = map.id().expected_dim();
        let tuple = sample_regular_tuple(map.curve(), k, seed).unwrap();
        let sig = map.eval(&tuple).unwrap();
        let img0 = random_slice(map.ambient_dim(), d, Some(&sig), subseed(seed, 1));
        let dom = if k > d {
            random_slice(2 * k, k - d, Some(&flatten(&tuple)), subseed(seed, 2))
        } else {
            Slice::empty(2 * k)
        };
        (tuple, dom, img0)
    }

    #[test]
    fn equality_homotopy_row_counts_are_square() {
        let curve = random_curve(3, 41);
        for id in [MapId::EuclidDiff, MapId::EuclidJointDiff, MapId::EuclidJoint] {
            let map = SignatureMap::build(id, &curve);
            let (tuple, dom, img0) = start_data(&map, 42);
            let img1 = random_slice(map.ambient_dim(), img0.rows(), None, 43);
            let sys = build_equality_homotopy(&map, &dom, &img0, &img1).unwrap();
            assert_eq!(sys.dim(), 2 * map.arity());
            let x0 = flatten(&tuple);
            let e = sys.eval(&x0, 0.0).unwrap();
            assert_eq!(e.residual.len(), 2 * map.arity());
            // Start point satisfies the t=0 system by construction.
            assert!(inf_norm(&e.residual) <= 1e-10, "{id}: {:?}", e.residual);
        }
    }

    #[test]
    fn mismatched_slice_shapes_are_rejected() {
        let curve = random_curve(2, 44);
        let map = SignatureMap::build(MapId::EuclidJoint, &curve);
        let dom = Slice::empty(8);
        let img0 = random_slice(6, 4, None, 1);
        let bad_rows = random_slice(6, 3, None, 2);
        assert!(matches!(
            build_equality_homotopy(&map, &dom, &img0, &bad_rows),
            Err(TrackError::DimensionMismatch { .. })
        ));
        let bad_ambient = random_slice(5, 4, None, 3);
        assert!(build_equality_homotopy(&map, &dom, &img0, &bad_ambient).is_err());
        let not_square = random_slice(6, 3, None, 4);
        assert!(build_equality_homotopy(&map, &dom, &not_square, &not_square).is_err());
        let deg3 = random_curve(3, 45);
        assert!(matches!(
            build_parameter_homotopy(&map, &deg3, &dom, &img0),
            Err(TrackError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn assembled_jacobians_match_finite_differences() {
        let curve = random_curve(3, 501);
        let target = random_curve(3, 502);
        for id in [MapId::EuclidDiff, MapId::EuclidJointDiff, MapId::EuclidJoint] {
            let map = SignatureMap::build(id, &curve);
            let (tuple, dom, img0) = start_data(&map, 503);
            let img1 = random_slice(map.ambient_dim(), img0.rows(), None, 504);
            let systems: Vec<SignatureHomotopy> = vec![
                build_equality_homotopy(&map, &dom, &img0, &img1).unwrap(),
                build_parameter_homotopy(&map, &target, &dom, &img0).unwrap(),
                build_monodromy_leg(&map, &target, &dom, &dom, &img0, &img1).unwrap(),
            ];
            let x = flatten(&tuple);
            let t = 0.37;
            let h = 1e-6;
            for (si, sys) in systems.iter().enumerate() {
                let e = sys.eval(&x, t).unwrap();
                // Spatial: complex-step in each variable.
                for v in 0..sys.dim() {
                    for delta in [c(h, 0.0), c(0.0, h)] {
                        let mut xp = x.clone();
                        xp[v] += delta;
                        let mut xm = x.clone();
                        xm[v] -= delta;
                        let rp = sys.eval(&xp, t).unwrap().residual;
                        let rm = sys.eval(&xm, t).unwrap().residual;
                        for r in 0..sys.dim() {
                            let fd = (rp[r] - rm[r]) / (2.0 * delta);
                            let an = e.jac_x[(r, v)];
                            assert!(
                                (fd - an).norm() <= 1e-5 * an.norm().max(1.0),
                                "{id} sys {si} row {r} var {v}: {fd} vs {an}"
                            );
                        }
                    }
                }
                // Parameter direction.
                let rp = sys.eval(&x, t + h).unwrap().residual;
                let rm = sys.eval(&x, t - h).unwrap().residual;
                for r in 0..sys.dim() {
                    let fd = (rp[r] - rm[r]) / (2.0 * h);
                    let an = e.jac_t[r];
                    assert!(
                        (fd - an).norm() <= 1e-5 * an.norm().max(1.0),
                        "{id} sys {si} row {r} dt: {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn constant_parameter_homotopy_returns_the_start() {
        let curve = random_curve(3, 71);
        let map = SignatureMap::build(MapId::EuclidJoint, &curve);
        let (tuple, dom, img) = start_data(&map, 72);
        let sys = build_parameter_homotopy(&map, &curve, &dom, &img).unwrap();
        let x0 = flatten(&tuple);
        let res = track(&sys, &x0, &TrackerSettings::default());
        assert_eq!(res.status, PathStatus::Success);
        assert!(rel_dist(&res.endpoint.unwrap(), &x0) <= 1e-9);
    }

    #[test]
    fn transported_tuples_land_on_the_moved_curve() {
        for s in 0..4u64 {
            let curve = random_curve(3, subseed(80, s));
            let g = GroupElement::random_euclidean(subseed(81, s));
            let moved = transform(&curve, &g).unwrap();
            let map = SignatureMap::build(MapId::EuclidJoint, &curve);
            let (tuple, dom, img) = start_data(&map, subseed(82, s));
            let sys = build_parameter_homotopy(&map, &moved, &dom, &img).unwrap();
            let res = track(&sys, &flatten(&tuple), &TrackerSettings::default());
            assert_eq!(res.status, PathStatus::Success, "seed {s}");
            let end = res.endpoint.unwrap();
            for pc in end.chunks_exact(2) {
                let p = CurvePoint::new(pc[0], pc[1]);
                assert!(moved.residual(&p) <= 1e-9, "seed {s}: residual {}", moved.residual(&p));
            }
        }
    }

    #[test]
    fn degenerating_pencil_does_not_pretend_success() {
        // Leading terms cancel mid-pencil: (1-t)(x^2+y^2-1) + t(-x^2-y^2+x-1)
        // collapses to a line at t = 1/2, where euclid_diff's image (a
        // curvature, identically zero on a line) cannot satisfy a generic
        // slice — the path must fail or flee, never "succeed".
        let f0 = MultiPoly::from_terms(
            2,
            [
                (vec![2u32, 0u32], c(1.0, 0.0)),
                (vec![0, 2], c(1.0, 0.0)),
                (vec![0, 0], c(-1.0, 0.0)),
            ],
        );
        let f1 = MultiPoly::from_terms(
            2,
            [
                (vec![2u32, 0u32], c(-1.0, 0.0)),
                (vec![0, 2], c(-1.0, 0.0)),
                (vec![1, 0], c(1.0, 0.0)),
                (vec![0, 0], c(-1.0, 0.0)),
            ],
        );
        let curve = Curve::new(f0).unwrap();
        let target = Curve::new(f1).unwrap();
        let map = SignatureMap::build(MapId::EuclidDiff, &curve);
        let (tuple, dom, img) = start_data(&map, 90);
        let sys = build_parameter_homotopy(&map, &target, &dom, &img).unwrap();
        let res = track(&sys, &flatten(&tuple), &TrackerSettings::default());
        assert_ne!(res.status, PathStatus::Success, "degenerate pencil must not track through");
    }
}
