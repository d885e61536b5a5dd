//! Plane algebraic curves `V(f)` in `C^2` and point operations on them.
//!
//! A [`Curve`] owns its defining polynomial together with the partial
//! derivatives through third order, which every signature formula downstream
//! consumes.  Point sampling intersects the curve with random complex affine
//! lines — substitute the line's parameterization, solve the univariate
//! restriction, pick a root, then Newton-polish on the square
//! (curve, line) system.

use num_complex::Complex64;
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{solve_linear, univariate_roots, AlgebraError, Matrix, MultiPoly};
use crate::groups::GroupElement;
use crate::rng::{complex_nonzero, complex_unit, seeded, SigRng};
use crate::wire::{c_in, c_out};

/// Squared-chord threshold: pairs at or below it count as isotropic and are
/// excluded from tuple domains.
pub const W_EPS: f64 = 1e-10;

/// Acceptance threshold for "point lies on the curve", relative to the
/// coefficient scale of the defining polynomial.
pub const TOL_ON_CURVE: f64 = 1e-10;

/// Newton refinement target (relative) and iteration cap.
pub const REFINE_TOL: f64 = 1e-12;
pub const REFINE_MAX_ITERS: usize = 30;

/// Line draws attempted per sampled point before giving up.
pub const SAMPLE_MAX_ATTEMPTS: usize = 24;

/// Relative gradient-magnitude floor below which a point counts as singular
/// (non-regular) on the curve.
pub const REGULAR_EPS: f64 = 1e-8;

/// Highest derivative order cached on a [`Curve`].
// Signature formulas read partials to order 3; their derivatives need one
// order more.
const PARTIAL_CACHE_ORDER: u32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("curve polynomial must have exactly 2 variables, got {0}")]
    NotPlanar(usize),
    #[error("curve degree must be at least 2, got {0}")]
    DegreeTooLow(u32),
    #[error("degree_hint {hint} does not match polynomial degree {actual}")]
    DegreeMismatch { hint: u32, actual: u32 },
    #[error("refinement hit a singular point (vanishing gradient)")]
    SingularPoint,
    #[error("refinement did not reach tolerance in {REFINE_MAX_ITERS} iterations")]
    NoConvergence,
    #[error("sampling failed after {attempts} line draws")]
    SampleFailure { attempts: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Point of `C^2`, usually on some curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: Complex64,
    pub y: Complex64,
}

impl CurvePoint {
    pub fn new(x: Complex64, y: Complex64) -> Self {
        CurvePoint { x, y }
    }

    /// Largest coordinate magnitude.
    pub fn max_abs(&self) -> f64 {
        self.x.norm().max(self.y.norm())
    }
}

/// Ordered point tuple; arity is dictated by the signature map using it.
pub type Tuple = Vec<CurvePoint>;

/// Squared complex chord length `(x1-x2)^2 + (y1-y2)^2`.
pub fn dist_sq(p: &CurvePoint, q: &CurvePoint) -> Complex64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    dx * dx + dy * dy
}

/// Whether all pairwise squared chords stay off the isotropic locus.
pub fn in_w(tuple: &[CurvePoint], w_eps: f64) -> bool {
    for i in 0..tuple.len() {
        for j in i + 1..tuple.len() {
            if dist_sq(&tuple[i], &tuple[j]).norm() <= w_eps {
                return false;
            }
        }
    }
    true
}

/// Plane curve with cached partial derivatives.
#[derive(Debug, Clone)]
pub struct Curve {
    f: MultiPoly,
    degree: u32,
    coeff_scale: f64,
    // partials[i][j] = d^{i+j} f / dx^i dy^j for i + j <= PARTIAL_CACHE_ORDER.
    partials: Vec<Vec<MultiPoly>>,
}

impl Curve {
    pub fn new(f: MultiPoly) -> Result<Self, CurveError> {
        if f.nvars() != 2 {
            return Err(CurveError::NotPlanar(f.nvars()));
        }
        let degree = f.total_degree();
        if degree < 2 {
            return Err(CurveError::DegreeTooLow(degree));
        }
        let order = PARTIAL_CACHE_ORDER as usize;
        let mut partials: Vec<Vec<MultiPoly>> = Vec::with_capacity(order + 1);
        for i in 0..=order {
            let mut row: Vec<MultiPoly> = Vec::with_capacity(order + 1 - i);
            for j in 0..=(order - i) {
                let p = if i == 0 && j == 0 {
                    f.clone()
                } else if j == 0 {
                    partials[i - 1][0].partial(0)
                } else {
                    row[j - 1].partial(1)
                };
                row.push(p);
            }
            partials.push(row);
        }
        let coeff_scale = f.coeff_scale();
        Ok(Curve { f, degree, coeff_scale, partials })
    }

    pub fn poly(&self) -> &MultiPoly {
        &self.f
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Largest coefficient magnitude of the defining polynomial; the
    /// reference scale for every relative residual on this curve.
    pub fn coeff_scale(&self) -> f64 {
        self.coeff_scale
    }

    /// Cached `d^{i+j} f / dx^i dy^j`; available for `i + j <= 4`.
    pub fn partial(&self, i: u32, j: u32) -> &MultiPoly {
        assert!(
            i + j <= PARTIAL_CACHE_ORDER,
            "partial order {} exceeds cache depth {PARTIAL_CACHE_ORDER}",
            i + j
        );
        &self.partials[i as usize][j as usize]
    }

    pub fn eval(&self, p: &CurvePoint) -> Complex64 {
        self.f.eval(&[p.x, p.y])
    }

    /// Gradient `(f_x, f_y)` at a point.
    pub fn gradient(&self, p: &CurvePoint) -> (Complex64, Complex64) {
        let pt = [p.x, p.y];
        (self.partial(1, 0).eval(&pt), self.partial(0, 1).eval(&pt))
    }

    /// Relative on-curve residual `|f(p)| / coeff_scale`.
    pub fn residual(&self, p: &CurvePoint) -> f64 {
        self.eval(p).norm() / self.coeff_scale
    }

    /// Whether `p` satisfies the curve equation to `tol_on_curve`.
    pub fn contains(&self, p: &CurvePoint, tol_on_curve: f64) -> bool {
        self.residual(p) <= tol_on_curve
    }

    /// Whether `p` is a regular (smooth) curve point: on the curve and with
    /// a gradient bounded away from zero relative to the coefficient scale.
    pub fn is_regular(&self, p: &CurvePoint) -> bool {
        if !self.contains(p, TOL_ON_CURVE) {
            return false;
        }
        let (gx, gy) = self.gradient(p);
        gx.norm().max(gy.norm()) > REGULAR_EPS * self.coeff_scale
    }
}

// --- external format ------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CurveWire {
    degree_hint: u32,
    poly: MultiPoly,
}

impl Serialize for Curve {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CurveWire { degree_hint: self.degree, poly: self.f.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Curve {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = CurveWire::deserialize(d)?;
        let actual = wire.poly.total_degree();
        if wire.degree_hint != actual {
            return Err(D::Error::custom(
                CurveError::DegreeMismatch { hint: wire.degree_hint, actual }.to_string(),
            ));
        }
        Curve::new(wire.poly).map_err(D::Error::custom)
    }
}

impl Serialize for CurvePoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            x: [f64; 2],
            y: [f64; 2],
        }
        Wire { x: c_out(self.x), y: c_out(self.y) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CurvePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            x: [f64; 2],
            y: [f64; 2],
        }
        let w = Wire::deserialize(d)?;
        Ok(CurvePoint { x: c_in(w.x).map_err(D::Error::custom)?, y: c_in(w.y).map_err(D::Error::custom)? })
    }
}

// --- sampling and refinement ----------------------------------------------

/// Sample `count` points of the curve, one random complex line per point.
/// Deterministic for a fixed seed; distinct with probability one (collisions
/// are rejected outright).
pub fn sample(curve: &Curve, count: usize, seed: u64) -> Result<Vec<CurvePoint>, CurveError> {
    let mut rng = seeded(seed);
    let mut pts: Vec<CurvePoint> = Vec::with_capacity(count);
    for _ in 0..count {
        let p = sample_one(curve, &mut rng, &pts)?;
        pts.push(p);
    }
    Ok(pts)
}

fn sample_one(
    curve: &Curve,
    rng: &mut SigRng,
    avoid: &[CurvePoint],
) -> Result<CurvePoint, CurveError> {
    for _ in 0..SAMPLE_MAX_ATTEMPTS {
        let base = (complex_unit(rng), complex_unit(rng));
        let dir = (complex_nonzero(rng, 1.0), complex_nonzero(rng, 1.0));
        // Restrict f to the line (x, y) = base + t * dir.
        let xt = MultiPoly::from_terms(1, [(vec![0], base.0), (vec![1], dir.0)]);
        let yt = MultiPoly::from_terms(1, [(vec![0], base.1), (vec![1], dir.1)]);
        let restricted = curve.poly().compose(&[xt, yt]);
        let Ok(roots) = univariate_roots(&restricted) else {
            continue;
        };
        if roots.is_empty() {
            continue;
        }
        let t = roots[rng.gen_range(0..roots.len())];
        let guess = CurvePoint::new(base.0 + t * dir.0, base.1 + t * dir.1);
        // Line as an affine-linear form vanishing along the parameterization.
        let line = [dir.1, -dir.0, dir.0 * base.1 - dir.1 * base.0];
        let Ok(p) = refine_on_line(curve, guess, line) else {
            continue;
        };
        if !curve.contains(&p, TOL_ON_CURVE) {
            continue;
        }
        if avoid.iter().any(|q| (q.x - p.x).norm() + (q.y - p.y).norm() < 1e-9) {
            continue;
        }
        return Ok(p);
    }
    Err(CurveError::SampleFailure { attempts: SAMPLE_MAX_ATTEMPTS })
}

/// Newton iteration on the square system (curve, fixed line
/// `l0*x + l1*y + l2 = 0`).
fn refine_on_line(
    curve: &Curve,
    mut p: CurvePoint,
    line: [Complex64; 3],
) -> Result<CurvePoint, CurveError> {
    let fscale = curve.coeff_scale();
    let lscale = line[0].norm().max(line[1].norm()).max(line[2].norm());
    for _ in 0..REFINE_MAX_ITERS {
        let fv = curve.eval(&p);
        let lv = line[0] * p.x + line[1] * p.y + line[2];
        if fv.norm() <= REFINE_TOL * fscale && lv.norm() <= REFINE_TOL * lscale {
            return Ok(p);
        }
        let (gx, gy) = curve.gradient(&p);
        let jac = Matrix::from_rows(&[vec![gx, gy], vec![line[0], line[1]]]);
        let step = solve_linear(&jac, &[-fv, -lv]).map_err(|_| CurveError::SingularPoint)?;
        p.x += step[0];
        p.y += step[1];
    }
    Err(CurveError::NoConvergence)
}

/// Project an approximate point onto the curve with minimal-norm Newton
/// steps along the gradient direction.
pub fn refine(curve: &Curve, mut p: CurvePoint) -> Result<CurvePoint, CurveError> {
    let scale = curve.coeff_scale();
    for _ in 0..REFINE_MAX_ITERS {
        let fv = curve.eval(&p);
        if fv.norm() <= REFINE_TOL * scale {
            return Ok(p);
        }
        let (gx, gy) = curve.gradient(&p);
        let n2 = gx.norm_sqr() + gy.norm_sqr();
        if n2.sqrt() <= REGULAR_EPS * scale {
            return Err(CurveError::SingularPoint);
        }
        let factor = fv / Complex64::new(n2, 0.0);
        p.x -= factor * gx.conj();
        p.y -= factor * gy.conj();
    }
    Err(CurveError::NoConvergence)
}

/// Sample a tuple of `arity` regular points, all pairwise chords
/// non-isotropic.  Retries whole tuples until the constraints hold.
pub fn sample_regular_tuple(curve: &Curve, arity: usize, seed: u64) -> Result<Tuple, CurveError> {
    for round in 0..SAMPLE_MAX_ATTEMPTS as u64 {
        let pts = sample(curve, arity, crate::rng::subseed(seed, round))?;
        if in_w(&pts, W_EPS) && pts.iter().all(|p| curve.is_regular(p)) {
            return Ok(pts);
        }
    }
    Err(CurveError::SampleFailure { attempts: SAMPLE_MAX_ATTEMPTS })
}

/// Dense random curve of the given total degree, coefficients drawn from
/// the unit box and deterministic in the seed.  The pure `x^degree` term is
/// kept away from zero so the total degree is unambiguous.
pub fn random_curve(degree: u32, seed: u64) -> Curve {
    let mut rng = seeded(seed);
    let mut terms = Vec::new();
    for i in 0..=degree {
        for j in 0..=(degree - i) {
            let c = if i == degree {
                complex_nonzero(&mut rng, 1.0)
            } else {
                complex_unit(&mut rng)
            };
            terms.push((vec![i, j], c));
        }
    }
    Curve::new(MultiPoly::from_terms(2, terms)).expect("dense degree >= 2 polynomial is a curve")
}

/// Image curve under a group element: `V(f)` maps to `V(f o g^{-1})`.
pub fn transform(curve: &Curve, g: &GroupElement) -> Result<Curve, CurveError> {
    let (lin, tr) = g.inverse_affine();
    let x_form = MultiPoly::from_terms(
        2,
        [
            (vec![1, 0], lin[0][0]),
            (vec![0, 1], lin[0][1]),
            (vec![0, 0], tr[0]),
        ],
    );
    let y_form = MultiPoly::from_terms(
        2,
        [
            (vec![1, 0], lin[1][0]),
            (vec![0, 1], lin[1][1]),
            (vec![0, 0], tr[1]),
        ],
    );
    Curve::new(curve.poly().compose(&[x_form, y_form]))
}
