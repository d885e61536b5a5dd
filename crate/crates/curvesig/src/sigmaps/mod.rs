//! Signature maps: rational maps on tuples of curve points whose images
//! characterize the curve up to a group action.
//!
//! Four maps are provided.  Two are differential — built from the curve's
//! partial derivatives, so their coordinate functions depend on the curve —
//! and two are joint, polynomial in the tuple alone:
//!
//! | id                  | tuple size | ambient | generic image dim |
//! |---------------------|-----------:|--------:|------------------:|
//! | `euclid_diff`       | 1          | 2       | 1                 |
//! | `euclid_joint_diff` | 2          | 3       | 2                 |
//! | `euclid_joint`      | 4          | 6       | 4                 |
//! | `equiaffine_joint`  | 6          | 7       | 5                 |
//!
//! `euclid_diff` sends a point to `(kappa^2, kappa_s^2)` — squared curvature
//! and squared arc-length derivative of curvature, as rational expressions in
//! the partials of the defining polynomial.  `euclid_joint_diff` sends a pair
//! to the squared chord length and the two tangent/chord projection ratios.
//! `euclid_joint` sends a 4-tuple to its six pairwise squared distances, and
//! `equiaffine_joint` sends a 6-tuple to seven signed triangle areas.
//!
//! Evaluation is *nested*: the curve's partials are evaluated at the tuple
//! points first and the signature formulas then combine those values.
//! Expanding the formulas into polynomials in the tuple variables is
//! mathematically equivalent but numerically ruinous — a moved curve's
//! coefficients grow with the motion, the sixth powers in `kappa_s^2` raise
//! them to ~1e12, and evaluating such an expansion cancels catastrophically.
//! Derivatives (the map Jacobians, and the sensitivity to deforming the
//! curve along a line segment of defining polynomials) are propagated
//! through the same nested formulas with forward-mode jets ([`dual`]), so
//! they are analytic and share the stable evaluation path.
//!
//! A note on reflections: squared distances, signed areas and the squared
//! curvature pair are invariant under the full complex Euclidean (resp.
//! equi-affine) group, but the projection ratios of `euclid_joint_diff` flip
//! sign under the reflection coset.  Its image is therefore compared modulo
//! the involution `(s0, s1, s2) -> (s0, -s1, -s2)`; [`SignatureMap::distance`]
//! and [`SignatureMap::image_variants`] build that quotient in, and callers
//! comparing raw vectors directly would see spurious mismatches on reflected
//! inputs.

mod dual;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{numeric_rank, rel_dist, Matrix, RANK_TOL};
use crate::curves::{sample_regular_tuple, Curve, CurveError, CurvePoint};
use crate::rng::subseed;
use dual::Dual;

/// A coordinate denominator (or tangency denominator) with magnitude at or
/// below this is treated as vanished and reported as a domain error.
pub const DENOM_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SigError {
    #[error("isotropic point: |F_x^2 + F_y^2| <= {DENOM_EPS:e} at a tuple point")]
    IsotropicPoint,
    #[error("degenerate chord: a projection denominator vanished")]
    DegenerateChord,
    #[error("tuple arity mismatch: map takes {expected} points, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Which of the four signature maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapId {
    EuclidDiff,
    EuclidJointDiff,
    EuclidJoint,
    EquiaffineJoint,
}

impl MapId {
    pub const ALL: [MapId; 4] = [
        MapId::EuclidDiff,
        MapId::EuclidJointDiff,
        MapId::EuclidJoint,
        MapId::EquiaffineJoint,
    ];

    /// Number of curve points in a tuple of the map's domain.
    pub fn arity(self) -> usize {
        match self {
            MapId::EuclidDiff => 1,
            MapId::EuclidJointDiff => 2,
            MapId::EuclidJoint => 4,
            MapId::EquiaffineJoint => 6,
        }
    }

    /// Dimension of the ambient image space.
    pub fn ambient_dim(self) -> usize {
        match self {
            MapId::EuclidDiff => 2,
            MapId::EuclidJointDiff => 3,
            MapId::EuclidJoint => 6,
            MapId::EquiaffineJoint => 7,
        }
    }

    /// Image dimension for a generic curve (lower on symmetric ones).
    pub fn expected_dim(self) -> usize {
        match self {
            MapId::EuclidDiff => 1,
            MapId::EuclidJointDiff => 2,
            MapId::EuclidJoint => 4,
            MapId::EquiaffineJoint => 5,
        }
    }

    /// Whether the map's invariance group is the equi-affine group rather
    /// than the Euclidean one.
    pub fn is_equiaffine(self) -> bool {
        matches!(self, MapId::EquiaffineJoint)
    }

    pub fn name(self) -> &'static str {
        match self {
            MapId::EuclidDiff => "euclid_diff",
            MapId::EuclidJointDiff => "euclid_joint_diff",
            MapId::EuclidJoint => "euclid_joint",
            MapId::EquiaffineJoint => "equiaffine_joint",
        }
    }

    /// Parse a map name; accepts `-` for `_`.
    pub fn parse(s: &str) -> Option<MapId> {
        let norm = s.replace('-', "_");
        MapId::ALL.into_iter().find(|m| m.name() == norm)
    }

    /// Signs of the involution identifying reflected images, if the map's
    /// coordinates are not all reflection-even.
    pub fn mirror_signs(self) -> Option<&'static [f64]> {
        match self {
            MapId::EuclidJointDiff => Some(&[1.0, -1.0, -1.0]),
            _ => None,
        }
    }
}

impl std::fmt::Display for MapId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A signature map bound to the curve whose partials feed its formulas.
#[derive(Debug, Clone)]
pub struct SignatureMap {
    id: MapId,
    curve: Curve,
}

impl SignatureMap {
    pub fn build(id: MapId, curve: &Curve) -> SignatureMap {
        SignatureMap { id, curve: curve.clone() }
    }

    pub fn id(&self) -> MapId {
        self.id
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn arity(&self) -> usize {
        self.id.arity()
    }

    pub fn ambient_dim(&self) -> usize {
        self.id.ambient_dim()
    }

    /// Flattened variable count `2 * arity`.
    pub fn nvars(&self) -> usize {
        2 * self.id.arity()
    }

    fn check_arity(&self, tuple: &[CurvePoint]) -> Result<(), SigError> {
        if tuple.len() != self.arity() {
            return Err(SigError::WrongArity { expected: self.arity(), got: tuple.len() });
        }
        Ok(())
    }

    /// Evaluate the map at a tuple.
    pub fn eval(&self, tuple: &[CurvePoint]) -> Result<Vec<Complex64>, SigError> {
        self.check_arity(tuple)?;
        Ok(jet_eval(self.id, &self.curve, None, &flatten(tuple))?.values)
    }

    /// Analytic Jacobian at a tuple: entry `(r, c)` is the partial of image
    /// coordinate `r` with respect to flattened tuple variable `c`.
    pub fn jacobian_ambient(&self, tuple: &[CurvePoint]) -> Result<Matrix, SigError> {
        self.check_arity(tuple)?;
        Ok(jet_eval(self.id, &self.curve, None, &flatten(tuple))?.dx)
    }

    /// Jacobian of the map restricted to the product of curves: the ambient
    /// Jacobian contracted with a unit tangent direction at each tuple
    /// point.  Entry `(r, i)` is the derivative of coordinate `r` as point
    /// `i` slides along the curve.
    pub fn jacobian_on_curve(&self, tuple: &[CurvePoint]) -> Result<Matrix, SigError> {
        let amb = self.jacobian_ambient(tuple)?;
        let m = self.ambient_dim();
        let k = self.arity();
        let mut jac = Matrix::zeros(m, k);
        for (i, p) in tuple.iter().enumerate() {
            let (gx, gy) = self.curve.gradient(p);
            // Tangent direction of V(f): orthogonal to the gradient.
            let (tx, ty) = (-gy, gx);
            let n = (tx.norm_sqr() + ty.norm_sqr()).sqrt();
            if n == 0.0 {
                continue; // singular tuple point: the column stays zero
            }
            for r in 0..m {
                jac[(r, i)] = (amb[(r, 2 * i)] * tx + amb[(r, 2 * i + 1)] * ty) / n;
            }
        }
        Ok(jac)
    }

    /// Numeric dimension of the signature image: the rank of the on-curve
    /// Jacobian, taken as the median over three independently sampled
    /// regular tuples to wash out unlucky draws.
    pub fn measured_image_dim(&self, seed: u64) -> Result<usize, SigError> {
        let mut ranks = Vec::with_capacity(3);
        let mut last_err: Option<SigError> = None;
        for attempt in 0..9u64 {
            if ranks.len() == 3 {
                break;
            }
            let tuple =
                match sample_regular_tuple(&self.curve, self.arity(), subseed(seed, attempt)) {
                    Ok(t) => t,
                    Err(e) => {
                        last_err = Some(e.into());
                        continue;
                    }
                };
            match self.jacobian_on_curve(&tuple) {
                Ok(j) => ranks.push(numeric_rank(&j, RANK_TOL)),
                Err(e) => last_err = Some(e),
            }
        }
        if ranks.len() < 3 {
            return Err(last_err.expect("fewer than 3 ranks implies a recorded error"));
        }
        ranks.sort_unstable();
        Ok(ranks[1])
    }

    /// The image vectors identified with `img`: just `img` itself, plus the
    /// reflected copy for maps with reflection-odd coordinates.
    pub fn image_variants(&self, img: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut out = vec![img.to_vec()];
        if let Some(signs) = self.id.mirror_signs() {
            out.push(img.iter().zip(signs).map(|(v, s)| v * s).collect());
        }
        out
    }

    /// Relative distance between image vectors, modulo the reflection
    /// involution where the map has one.
    pub fn distance(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        self.image_variants(b)
            .iter()
            .map(|variant| rel_dist(a, variant))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Flatten a tuple to `(x1, y1, x2, y2, ...)`.
pub fn flatten(tuple: &[CurvePoint]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(2 * tuple.len());
    for p in tuple {
        out.push(p.x);
        out.push(p.y);
    }
    out
}

/// Inverse of [`flatten`].
pub fn unflatten(coords: &[Complex64]) -> Vec<CurvePoint> {
    assert!(coords.len() % 2 == 0, "odd coordinate count");
    coords
        .chunks_exact(2)
        .map(|c| CurvePoint::new(c[0], c[1]))
        .collect()
}

// --- jet evaluation core ------------------------------------------------------

/// Signature values with first derivatives at a flattened tuple.
#[derive(Debug, Clone)]
pub(crate) struct JetEval {
    pub values: Vec<Complex64>,
    /// `m x 2k` spatial Jacobian.
    pub dx: Matrix,
    /// Derivative of each coordinate along the curve deformation
    /// `(1 - t) f0 + t f1`; zero for the joint maps and for a fixed curve.
    pub dt: Vec<Complex64>,
}

/// Evaluate map coordinates plus derivatives at `point` (flattened, length
/// `2 * arity`).  With `target = Some((f1, t))` the curve partials are read
/// from the pencil `(1 - t) curve + t f1` and the last derivative slot is
/// the movement of each coordinate with `t`.
pub(crate) fn jet_eval(
    id: MapId,
    curve: &Curve,
    target: Option<(&Curve, Complex64)>,
    point: &[Complex64],
) -> Result<JetEval, SigError> {
    assert_eq!(point.len(), 2 * id.arity(), "flattened tuple length mismatch");
    match id {
        MapId::EuclidDiff => jet_euclid_diff(curve, target, point),
        MapId::EuclidJointDiff => jet_joint_diff(curve, target, point),
        MapId::EuclidJoint => Ok(jet_pairwise::<9>(point, 4)),
        MapId::EquiaffineJoint => Ok(jet_signed_areas(point)),
    }
}

fn pack<const N: usize>(coords: &[Dual<N>], k: usize) -> JetEval {
    debug_assert_eq!(N, 2 * k + 1);
    let m = coords.len();
    let mut dx = Matrix::zeros(m, 2 * k);
    let mut dt = vec![Complex64::default(); m];
    let mut values = Vec::with_capacity(m);
    for (r, c) in coords.iter().enumerate() {
        values.push(c.v);
        for v in 0..2 * k {
            dx[(r, v)] = c.d[v];
        }
        dt[r] = c.d[2 * k];
    }
    JetEval { values, dx, dt }
}

/// `(1 - t) a + t b`.
fn lerp(a: Complex64, b: Complex64, t: Complex64) -> Complex64 {
    a + t * (b - a)
}

/// Jet of the partial `d^{a+b} f / dx^a dy^b` at a point: the value, its
/// spatial derivatives (the next-order partials) in slots `(sx, sy)`, and —
/// when deforming toward a second curve — the pencil direction in the last
/// slot.
fn seed_partial<const N: usize>(
    curve: &Curve,
    target: Option<(&Curve, Complex64)>,
    at: &[Complex64],
    a: u32,
    b: u32,
    sx: usize,
    sy: usize,
) -> Dual<N> {
    let v0 = curve.partial(a, b).eval(at);
    let vx0 = curve.partial(a + 1, b).eval(at);
    let vy0 = curve.partial(a, b + 1).eval(at);
    match target {
        None => Dual::seeded(v0, &[(sx, vx0), (sy, vy0)]),
        Some((f1, t)) => {
            let v1 = f1.partial(a, b).eval(at);
            let vx1 = f1.partial(a + 1, b).eval(at);
            let vy1 = f1.partial(a, b + 1).eval(at);
            Dual::seeded(
                lerp(v0, v1, t),
                &[(sx, lerp(vx0, vx1, t)), (sy, lerp(vy0, vy1, t)), (N - 1, v1 - v0)],
            )
        }
    }
}

/// The partials of `f` through order 3 at one point, as jets.
struct DiffPartials<const N: usize> {
    fx: Dual<N>,
    fy: Dual<N>,
    fxx: Dual<N>,
    fxy: Dual<N>,
    fyy: Dual<N>,
    fxxx: Dual<N>,
    fxxy: Dual<N>,
    fxyy: Dual<N>,
    fyyy: Dual<N>,
}

impl<const N: usize> DiffPartials<N> {
    fn at(
        curve: &Curve,
        target: Option<(&Curve, Complex64)>,
        at: &[Complex64],
        sx: usize,
        sy: usize,
    ) -> Self {
        let sp = |a, b| seed_partial::<N>(curve, target, at, a, b, sx, sy);
        DiffPartials {
            fx: sp(1, 0),
            fy: sp(0, 1),
            fxx: sp(2, 0),
            fxy: sp(1, 1),
            fyy: sp(0, 2),
            fxxx: sp(3, 0),
            fxxy: sp(2, 1),
            fxyy: sp(1, 2),
            fyyy: sp(0, 3),
        }
    }
}

/// Curvature building blocks `(A, D, B)`:
/// `A = F_x^2 F_yy - 2 F_xy F_x F_y + F_xx F_y^2` (curvature numerator),
/// `B = F_x^2 + F_y^2` (squared gradient norm), and `D` the numerator of
/// `kappa_s B^3` — the third-order combination minus `3((F_x^2 - F_y^2)F_xy
/// - F_x F_y (F_xx - F_yy)) A`.
fn curvature_parts<const N: usize>(p: &DiffPartials<N>) -> (Dual<N>, Dual<N>, Dual<N>) {
    let a = p.fx.sq() * p.fyy - (p.fxy * p.fx * p.fy).scale(2.0) + p.fxx * p.fy.sq();
    let b = p.fx.sq() + p.fy.sq();

    let fx2 = p.fx.sq();
    let fx3 = fx2 * p.fx;
    let fx4 = fx3 * p.fx;
    let fx5 = fx4 * p.fx;
    let fy2 = p.fy.sq();
    let fy3 = fy2 * p.fy;
    let fy4 = fy3 * p.fy;
    let fy5 = fy4 * p.fy;

    let c_xxx = -(fx2 * fy3) - fy5;
    let c_xxy = (fx3 * fy2 + fy4 * p.fx).scale(3.0);
    let c_xyy = -(fx4 * p.fy + fx2 * fy3).scale(3.0);
    let c_yyy = fx5 + fx3 * fy2;
    let corr = ((fx2 - fy2) * p.fxy - p.fx * p.fy * (p.fxx - p.fyy)) * a;
    let d = c_xxx * p.fxxx + c_xxy * p.fxxy + c_xyy * p.fxyy + c_yyy * p.fyyy
        - corr.scale(3.0);
    (a, d, b)
}

/// `(kappa^2, kappa_s^2) = (A^2 / B^3, D^2 / B^6)`.
fn jet_euclid_diff(
    curve: &Curve,
    target: Option<(&Curve, Complex64)>,
    point: &[Complex64],
) -> Result<JetEval, SigError> {
    const N: usize = 3;
    let parts = DiffPartials::<N>::at(curve, target, point, 0, 1);
    let (a, d, b) = curvature_parts(&parts);
    if b.v.norm() <= DENOM_EPS {
        return Err(SigError::IsotropicPoint);
    }
    let b3 = b.powi(3);
    let kappa_sq = a.sq() / b3;
    let kappa_s_sq = d.sq() / b3.sq();
    Ok(pack(&[kappa_sq, kappa_s_sq], 1))
}

/// `(d_12, iota_1, iota_2)`: squared chord length plus, at each endpoint,
/// the tangent/chord projection ratio
/// `[(y2 - y1) F_x + (x1 - x2) F_y] / [(x1 - x2) F_x + (y1 - y2) F_y]`.
fn jet_joint_diff(
    curve: &Curve,
    target: Option<(&Curve, Complex64)>,
    point: &[Complex64],
) -> Result<JetEval, SigError> {
    const N: usize = 5;
    let x1 = Dual::<N>::variable(point[0], 0);
    let y1 = Dual::<N>::variable(point[1], 1);
    let x2 = Dual::<N>::variable(point[2], 2);
    let y2 = Dual::<N>::variable(point[3], 3);

    let mut grads = Vec::with_capacity(2);
    for i in 0..2 {
        let at = &point[2 * i..2 * i + 2];
        let fx = seed_partial::<N>(curve, target, at, 1, 0, 2 * i, 2 * i + 1);
        let fy = seed_partial::<N>(curve, target, at, 0, 1, 2 * i, 2 * i + 1);
        if (fx.v * fx.v + fy.v * fy.v).norm() <= DENOM_EPS {
            return Err(SigError::IsotropicPoint);
        }
        grads.push((fx, fy));
    }

    let dx = x1 - x2;
    let dy12 = y1 - y2;
    let dy21 = y2 - y1;
    let d12 = dx.sq() + dy12.sq();

    let mut coords = vec![d12];
    for (fx, fy) in grads {
        let num = dy21 * fx + dx * fy;
        let den = dx * fx + dy12 * fy;
        if den.v.norm() <= DENOM_EPS {
            return Err(SigError::DegenerateChord);
        }
        coords.push(num / den);
    }
    Ok(pack(&coords, 2))
}

/// All pairwise squared distances of an `n`-tuple in index-lexicographic
/// order `(d_12, d_13, ..., d_{n-1,n})`.
fn jet_pairwise<const N: usize>(point: &[Complex64], n: usize) -> JetEval {
    let xs: Vec<Dual<N>> = (0..n).map(|i| Dual::variable(point[2 * i], 2 * i)).collect();
    let ys: Vec<Dual<N>> = (0..n).map(|i| Dual::variable(point[2 * i + 1], 2 * i + 1)).collect();
    let mut coords = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            coords.push((xs[i] - xs[j]).sq() + (ys[i] - ys[j]).sq());
        }
    }
    pack(&coords, n)
}

/// The seven signed areas `(v123, v124, v125, v126, v134, v135, v136)` of a
/// 6-tuple, `v(i,j,k) = x_i (y_j - y_k) - x_j (y_i - y_k) + x_k (y_i - y_j)`.
fn jet_signed_areas(point: &[Complex64]) -> JetEval {
    const N: usize = 13;
    let x = |i: usize| Dual::<N>::variable(point[2 * i], 2 * i);
    let y = |i: usize| Dual::<N>::variable(point[2 * i + 1], 2 * i + 1);
    let v = |i: usize, j: usize, k: usize| {
        x(i) * (y(j) - y(k)) - x(j) * (y(i) - y(k)) + x(k) * (y(i) - y(j))
    };
    let coords: Vec<Dual<N>> =
        [(0, 1, 2), (0, 1, 3), (0, 1, 4), (0, 1, 5), (0, 2, 3), (0, 2, 4), (0, 2, 5)]
            .into_iter()
            .map(|(i, j, k)| v(i, j, k))
            .collect();
    pack(&coords, 6)
}

// --- independent evaluation routes ------------------------------------------

/// Derivatives `(y', y'', y''')` of the implicit function `y(x)` at a curve
/// point, by implicit differentiation of `F(x, y(x)) = 0`.  `None` when
/// `|F_y|` is too small for the graph view to exist.
pub fn implicit_jets(
    curve: &Curve,
    p: &CurvePoint,
) -> Option<(Complex64, Complex64, Complex64)> {
    let at = [p.x, p.y];
    let ev = |i: u32, j: u32| curve.partial(i, j).eval(&at);
    let fy = ev(0, 1);
    if fy.norm() <= DENOM_EPS {
        return None;
    }
    let fx = ev(1, 0);
    let fxx = ev(2, 0);
    let fxy = ev(1, 1);
    let fyy = ev(0, 2);
    let fxxx = ev(3, 0);
    let fxxy = ev(2, 1);
    let fxyy = ev(1, 2);
    let fyyy = ev(0, 3);

    let y1 = -fx / fy;
    let y2 = -(fxx + 2.0 * fxy * y1 + fyy * y1 * y1) / fy;
    let y3 = -(fxxx
        + 3.0 * fxxy * y1
        + 3.0 * fxyy * y1 * y1
        + fyyy * y1 * y1 * y1
        + 3.0 * y2 * (fxy + fyy * y1))
        / fy;
    Some((y1, y2, y3))
}

/// `(kappa^2, kappa_s^2)` from graph-coordinate jets: the classical
/// `y''^2 / (1 + y'^2)^3` and its arc-length derivative squared.
pub fn diff_signature_from_jets(jets: (Complex64, Complex64, Complex64)) -> [Complex64; 2] {
    let (y1, y2, y3) = jets;
    let w = 1.0 + y1 * y1;
    let w3 = w * w * w;
    let kappa_sq = y2 * y2 / w3;
    let num = y3 * w - 3.0 * y1 * y2 * y2;
    let kappa_s_sq = num * num / (w3 * w3);
    [kappa_sq, kappa_s_sq]
}

/// The chord projection ratio of `euclid_joint_diff` computed from the
/// implicit slope `y'` at the first point of the pair:
/// `(dx + dy y') / (dy - dx y')` with `dx = x1 - x2`, `dy = y1 - y2`.
pub fn chord_ratio_from_jet(p1: &CurvePoint, p2: &CurvePoint, y1_slope: Complex64) -> Complex64 {
    let dx = p1.x - p2.x;
    let dy = p1.y - p2.y;
    (dx + dy * y1_slope) / (dy - dx * y1_slope)
}

// --- three-point rank probe ---------------------------------------------------

/// On-curve Jacobian of the three pairwise squared distances of a triple,
/// rows ordered `(d_12, d_13, d_23)`.
fn d3_on_curve_jacobian(curve: &Curve, tuple: &[CurvePoint; 3]) -> Matrix {
    let mut jac = Matrix::zeros(3, 3);
    let tangents: Vec<(Complex64, Complex64)> = tuple
        .iter()
        .map(|p| {
            let (gx, gy) = curve.gradient(p);
            let (tx, ty) = (-gy, gx);
            let n = (tx.norm_sqr() + ty.norm_sqr()).sqrt();
            if n == 0.0 {
                (Complex64::default(), Complex64::default())
            } else {
                (tx / n, ty / n)
            }
        })
        .collect();
    for (row, (i, j)) in [(0usize, 1usize), (0, 2), (1, 2)].into_iter().enumerate() {
        let dx = tuple[i].x - tuple[j].x;
        let dy = tuple[i].y - tuple[j].y;
        // d/dp_i = 2 (p_i - p_j), d/dp_j the negative.
        jac[(row, i)] = 2.0 * (dx * tangents[i].0 + dy * tangents[i].1);
        jac[(row, j)] = -2.0 * (dx * tangents[j].0 + dy * tangents[j].1);
    }
    jac
}

/// Rank of the three-point distance map's on-curve Jacobian (median over
/// three sampled triples).  Rank 3 means the triple distances already fill
/// space; symmetric curves such as circles drop to 2.
pub fn dim3_rank(curve: &Curve, seed: u64) -> Result<usize, SigError> {
    let mut ranks = Vec::with_capacity(3);
    let mut last_err: Option<SigError> = None;
    for attempt in 0..9u64 {
        if ranks.len() == 3 {
            break;
        }
        match sample_regular_tuple(curve, 3, subseed(seed, attempt)) {
            Ok(t) => {
                let tuple: [CurvePoint; 3] = [t[0], t[1], t[2]];
                let jac = d3_on_curve_jacobian(curve, &tuple);
                ranks.push(numeric_rank(&jac, RANK_TOL));
            }
            Err(e) => last_err = Some(e.into()),
        }
    }
    if ranks.len() < 3 {
        return Err(last_err.expect("fewer than 3 ranks implies a recorded error"));
    }
    ranks.sort_unstable();
    Ok(ranks[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::MultiPoly;
    use crate::curves::{random_curve, sample, transform, Tuple};
    use crate::groups::{EuclideanElement, GroupElement};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(x: f64, y: f64) -> CurvePoint {
        CurvePoint::new(c(x, 0.0), c(y, 0.0))
    }

    fn curve_from(terms: &[(u32, u32, f64)]) -> Curve {
        Curve::new(MultiPoly::from_terms(
            2,
            terms.iter().map(|&(i, j, v)| (vec![i, j], c(v, 0.0))),
        ))
        .unwrap()
    }

    fn circle(r: f64) -> Curve {
        curve_from(&[(2, 0, 1.0), (0, 2, 1.0), (0, 0, -r * r)])
    }

    fn ellipse() -> Curve {
        curve_from(&[(2, 0, 0.25), (0, 2, 1.0), (0, 0, -1.0)])
    }

    #[test]
    fn map_metadata_is_consistent() {
        for id in MapId::ALL {
            assert_eq!(MapId::parse(id.name()), Some(id));
            assert_eq!(MapId::parse(&id.name().replace('_', "-")), Some(id));
            assert!(id.expected_dim() < id.ambient_dim());
        }
        assert_eq!(MapId::parse("no_such_map"), None);
        let circ = circle(1.0);
        for id in MapId::ALL {
            let map = SignatureMap::build(id, &circ);
            assert_eq!(map.ambient_dim(), id.ambient_dim());
            assert_eq!(map.nvars(), 2 * id.arity());
        }
    }

    #[test]
    fn circle_curvature_signature_is_constant() {
        // On x^2 + y^2 = r^2 the curvature is 1/r and constant, so the
        // image is the single point (1/r^2, 0).
        for r in [1.0, 2.0] {
            let circ = circle(r);
            let map = SignatureMap::build(MapId::EuclidDiff, &circ);
            for p in sample(&circ, 5, 11).unwrap() {
                let sig = map.eval(&[p]).unwrap();
                assert!((sig[0] - 1.0 / (r * r)).norm() <= 1e-9, "kappa^2 off: {}", sig[0]);
                assert!(sig[1].norm() <= 1e-9, "kappa_s^2 off: {}", sig[1]);
            }
        }
    }

    #[test]
    fn unit_square_pairwise_distances() {
        let circ = circle(1.0); // joint map coordinates ignore the curve
        let map = SignatureMap::build(MapId::EuclidJoint, &circ);
        let tuple = vec![pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 0.0), pt(1.0, 1.0)];
        let sig = map.eval(&tuple).unwrap();
        let expect = [1.0, 1.0, 2.0, 2.0, 1.0, 1.0];
        for (got, want) in sig.iter().zip(expect) {
            assert!((got - want).norm() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn unit_triangle_signed_area_is_one() {
        let circ = circle(1.0);
        let map = SignatureMap::build(MapId::EquiaffineJoint, &circ);
        let tuple = vec![
            pt(0.0, 0.0),
            pt(1.0, 0.0),
            pt(0.0, 1.0),
            pt(2.0, 3.0),
            pt(-1.0, 1.0),
            pt(0.5, -2.0),
        ];
        let sig = map.eval(&tuple).unwrap();
        assert!((sig[0] - 1.0).norm() < 1e-14, "v(1,2,3) = {}", sig[0]);
    }

    #[test]
    fn wrong_arity_is_reported() {
        let map = SignatureMap::build(MapId::EuclidJoint, &circle(1.0));
        let e = map.eval(&[pt(0.0, 1.0)]).unwrap_err();
        assert_eq!(e, SigError::WrongArity { expected: 4, got: 1 });
    }

    #[test]
    fn isotropic_point_guard_fires() {
        // On y = x^2 the gradient at (i/2, -1/4) is (-i, 1), which has
        // vanishing squared norm.
        let parabola = curve_from(&[(0, 1, 1.0), (2, 0, -1.0)]);
        let p = CurvePoint::new(c(0.0, 0.5), c(-0.25, 0.0));
        assert!(parabola.contains(&p, 1e-12));
        let map = SignatureMap::build(MapId::EuclidDiff, &parabola);
        assert_eq!(map.eval(&[p]), Err(SigError::IsotropicPoint));

        let joint = SignatureMap::build(MapId::EuclidJointDiff, &parabola);
        let q = CurvePoint::new(c(1.0, 0.0), c(1.0, 0.0));
        assert_eq!(joint.eval(&[p, q]), Err(SigError::IsotropicPoint));
    }

    #[test]
    fn degenerate_chord_guard_fires() {
        // On y = x^3, the chord through (1,1) and (-2,-8) is orthogonal to
        // the gradient at the first point, so the projection ratio blows up.
        let cubic = curve_from(&[(0, 1, 1.0), (3, 0, -1.0)]);
        let p1 = pt(1.0, 1.0);
        let p2 = pt(-2.0, -8.0);
        assert!(cubic.contains(&p1, 1e-12) && cubic.contains(&p2, 1e-12));
        let map = SignatureMap::build(MapId::EuclidJointDiff, &cubic);
        assert_eq!(map.eval(&[p1, p2]), Err(SigError::DegenerateChord));
    }

    #[test]
    fn curvature_pair_matches_graph_jets() {
        // Independent route: implicit differentiation jets of y(x) feed the
        // classical graph formulas; must agree with the gradient-form
        // rational map.
        for s in 0..30u64 {
            let deg = 2 + (s % 3) as u32;
            let curve = random_curve(deg, subseed(900, s));
            let map = SignatureMap::build(MapId::EuclidDiff, &curve);
            let Ok(pts) = sample(&curve, 2, subseed(901, s)) else {
                continue;
            };
            for p in pts {
                let Some(jets) = implicit_jets(&curve, &p) else {
                    continue;
                };
                let via_jets = diff_signature_from_jets(jets);
                let via_partials = match map.eval(&[p]) {
                    Ok(v) => v,
                    Err(_) => continue, // isotropic draw
                };
                assert!(
                    rel_dist(&via_partials, &via_jets) <= 1e-8,
                    "seed {s}: {via_partials:?} vs {via_jets:?}"
                );
            }
        }
    }

    #[test]
    fn chord_ratio_matches_graph_jets() {
        for s in 0..30u64 {
            let deg = 2 + (s % 3) as u32;
            let curve = random_curve(deg, subseed(910, s));
            let map = SignatureMap::build(MapId::EuclidJointDiff, &curve);
            let Ok(pts) = sample(&curve, 2, subseed(911, s)) else {
                continue;
            };
            let (p1, p2) = (pts[0], pts[1]);
            let sig = match map.eval(&[p1, p2]) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let Some((s1, _, _)) = implicit_jets(&curve, &p1) else { continue };
            let Some((s2, _, _)) = implicit_jets(&curve, &p2) else { continue };
            let i1 = chord_ratio_from_jet(&p1, &p2, s1);
            // Point 2's ratio uses the same chord with the roles swapped;
            // both numerator and denominator flip sign, so the value holds.
            let i2 = chord_ratio_from_jet(&p2, &p1, s2);
            assert!(rel_dist(&sig[1..2], &[i1]) <= 1e-8, "seed {s}");
            assert!(rel_dist(&sig[2..3], &[i2]) <= 1e-8, "seed {s}");
        }
    }

    #[test]
    fn ambient_jacobian_matches_finite_differences() {
        let curve = random_curve(3, 77);
        for id in MapId::ALL {
            let map = SignatureMap::build(id, &curve);
            let tuple = sample_regular_tuple(&curve, id.arity(), 78).unwrap();
            let jac = map.jacobian_ambient(&tuple).unwrap();
            let base = flatten(&tuple);
            let h = 1e-6;
            for v in 0..map.nvars() {
                // Step along both the real and imaginary axes; the map is
                // holomorphic so both quotients estimate the same derivative.
                for delta in [c(h, 0.0), c(0.0, h)] {
                    let mut plus = base.clone();
                    plus[v] += delta;
                    let mut minus = base.clone();
                    minus[v] -= delta;
                    let f_plus = map.eval(&unflatten(&plus)).unwrap();
                    let f_minus = map.eval(&unflatten(&minus)).unwrap();
                    for r in 0..map.ambient_dim() {
                        let fd = (f_plus[r] - f_minus[r]) / (2.0 * delta);
                        let an = jac[(r, v)];
                        assert!(
                            (fd - an).norm() <= 1e-5 * an.norm().max(1.0),
                            "{id}: row {r} var {v}: fd {fd} vs {an}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn pencil_derivative_matches_finite_differences() {
        // Deform one cubic toward another: the dt slot of the jet must
        // match a finite-difference quotient in t.
        let c0 = random_curve(3, 610);
        let c1 = random_curve(3, 611);
        let tuple = sample_regular_tuple(&c0, 2, 612).unwrap();
        let point = flatten(&tuple);
        let t = c(0.3, 0.1);
        let h = 1e-6;
        for id in [MapId::EuclidDiff, MapId::EuclidJointDiff] {
            let point = &point[..2 * id.arity()];
            let jet = jet_eval(id, &c0, Some((&c1, t)), point).unwrap();
            let plus = jet_eval(id, &c0, Some((&c1, t + h)), point).unwrap();
            let minus = jet_eval(id, &c0, Some((&c1, t - h)), point).unwrap();
            for r in 0..id.ambient_dim() {
                let fd = (plus.values[r] - minus.values[r]) / (2.0 * h);
                assert!(
                    (fd - jet.dt[r]).norm() <= 1e-5 * jet.dt[r].norm().max(1.0),
                    "{id} row {r}: fd {fd} vs {}",
                    jet.dt[r]
                );
            }
        }
        // Joint maps do not see the curve at all.
        let jet = jet_eval(MapId::EuclidJoint, &c0, Some((&c1, t)), &flatten(&sample_regular_tuple(&c0, 4, 613).unwrap())).unwrap();
        assert!(jet.dt.iter().all(|d| d.norm() == 0.0));
    }

    #[test]
    fn pairwise_distance_jacobian_row_is_the_textbook_gradient() {
        let map = SignatureMap::build(MapId::EuclidJoint, &circle(1.0));
        let tuple = vec![pt(0.3, -0.4), pt(1.0, 2.0), pt(-1.5, 0.25), pt(2.0, -1.0)];
        let jac = map.jacobian_ambient(&tuple).unwrap();
        let dx = tuple[0].x - tuple[1].x;
        let dy = tuple[0].y - tuple[1].y;
        let want = [dx * 2.0, dy * 2.0, -dx * 2.0, -dy * 2.0];
        for (v, w) in want.iter().enumerate() {
            assert!((jac[(0, v)] - w).norm() < 1e-13);
        }
        for v in 4..8 {
            assert!(jac[(0, v)].norm() < 1e-13);
        }
    }

    #[test]
    fn euclidean_invariance_including_reflections() {
        // distance() folds in the reflection involution where required, so
        // all three Euclidean maps are invariant under the full group.
        for s in 0..12u64 {
            let deg = 2 + (s % 3) as u32;
            let curve = random_curve(deg, subseed(920, s));
            let g = GroupElement::random_euclidean(subseed(921, s));
            let moved = transform(&curve, &g).unwrap();
            for id in [MapId::EuclidDiff, MapId::EuclidJointDiff, MapId::EuclidJoint] {
                let map = SignatureMap::build(id, &curve);
                let moved_map = SignatureMap::build(id, &moved);
                let Ok(tuple) = sample_regular_tuple(&curve, id.arity(), subseed(922, s)) else {
                    continue;
                };
                let moved_tuple: Tuple = tuple.iter().map(|p| g.act(p)).collect();
                let (Ok(sig), Ok(moved_sig)) = (map.eval(&tuple), moved_map.eval(&moved_tuple))
                else {
                    continue;
                };
                assert!(
                    map.distance(&sig, &moved_sig) <= 1e-8,
                    "{id} seed {s}: {:?} vs {:?}",
                    sig,
                    moved_sig
                );
            }
        }
    }

    #[test]
    fn reflection_flips_chord_ratio_signs() {
        // The raw euclid_joint_diff vector is *not* fixed by reflections:
        // the involution (s0, s1, s2) -> (s0, -s1, -s2) is.  This pins down
        // why distance() must quotient by it.
        let curve = random_curve(3, 417);
        let g = GroupElement::Euclidean(
            EuclideanElement::reflect_x_axis().compose(&EuclideanElement {
                c: c(0.6, 0.0),
                s: c(0.8, 0.0),
                eps: 1,
                a: c(0.3, -0.1),
                b: c(-0.2, 0.4),
            }),
        );
        let moved = transform(&curve, &g).unwrap();
        let map = SignatureMap::build(MapId::EuclidJointDiff, &curve);
        let moved_map = SignatureMap::build(MapId::EuclidJointDiff, &moved);
        let tuple = sample_regular_tuple(&curve, 2, 418).unwrap();
        let moved_tuple: Tuple = tuple.iter().map(|p| g.act(p)).collect();
        let sig = map.eval(&tuple).unwrap();
        let moved_sig = moved_map.eval(&moved_tuple).unwrap();
        assert!((sig[0] - moved_sig[0]).norm() <= 1e-9 * sig[0].norm().max(1.0));
        assert!((sig[1] + moved_sig[1]).norm() <= 1e-8 * sig[1].norm().max(1.0));
        assert!((sig[2] + moved_sig[2]).norm() <= 1e-8 * sig[2].norm().max(1.0));
        assert!(map.distance(&sig, &moved_sig) <= 1e-8);
        assert!(rel_dist(&sig, &moved_sig) > 1e-3, "raw vectors should differ");
    }

    #[test]
    fn equiaffine_invariance() {
        for s in 0..8u64 {
            let curve = random_curve(2 + (s % 3) as u32, subseed(930, s));
            let g = GroupElement::random_equiaffine(subseed(931, s));
            let moved = transform(&curve, &g).unwrap();
            let map = SignatureMap::build(MapId::EquiaffineJoint, &curve);
            let moved_map = SignatureMap::build(MapId::EquiaffineJoint, &moved);
            let Ok(tuple) = sample_regular_tuple(&curve, 6, subseed(932, s)) else {
                continue;
            };
            let moved_tuple: Tuple = tuple.iter().map(|p| g.act(p)).collect();
            let sig = map.eval(&tuple).unwrap();
            let moved_sig = moved_map.eval(&moved_tuple).unwrap();
            assert!(map.distance(&sig, &moved_sig) <= 1e-8, "seed {s}");
        }
    }

    #[test]
    fn swapping_the_first_two_points_permutes_distances() {
        let map = SignatureMap::build(MapId::EuclidJoint, &circle(1.0));
        let t = vec![pt(0.1, 0.2), pt(1.3, -0.4), pt(-0.5, 0.6), pt(0.7, 1.8)];
        let swapped = vec![t[1], t[0], t[2], t[3]];
        let a = map.eval(&t).unwrap();
        let b = map.eval(&swapped).unwrap();
        // (d12, d13, d14, d23, d24, d34) -> (d12, d23, d24, d13, d14, d34)
        let perm = [0usize, 3, 4, 1, 2, 5];
        for (i, &pi) in perm.iter().enumerate() {
            assert!((a[i] - b[pi]).norm() < 1e-14);
        }
    }

    #[test]
    fn image_dims_match_curve_symmetry() {
        // A generic conic has finite symmetry: every map reaches its full
        // generic image dimension.  The circle's rotational symmetry
        // collapses each dimension by one, and euclid_diff's image is a
        // single point (dimension zero).
        let generic = random_curve(2, 5150);
        let circ = circle(1.0);
        for (id, want) in [
            (MapId::EuclidDiff, 1),
            (MapId::EuclidJointDiff, 2),
            (MapId::EuclidJoint, 4),
        ] {
            let map = SignatureMap::build(id, &generic);
            assert_eq!(map.measured_image_dim(42).unwrap(), want, "{id} generic");
        }
        for (id, want) in [
            (MapId::EuclidDiff, 0),
            (MapId::EuclidJointDiff, 1),
            (MapId::EuclidJoint, 3),
        ] {
            let map = SignatureMap::build(id, &circ);
            assert_eq!(map.measured_image_dim(43).unwrap(), want, "{id} circle");
        }
    }

    #[test]
    fn quartic_rank_is_full_at_many_tuples() {
        let quartic = random_curve(4, 7171);
        let map = SignatureMap::build(MapId::EuclidJoint, &quartic);
        for t in 0..5u64 {
            let tuple = sample_regular_tuple(&quartic, 4, subseed(7272, t)).unwrap();
            let jac = map.jacobian_on_curve(&tuple).unwrap();
            assert_eq!(numeric_rank(&jac, RANK_TOL), 4, "tuple {t}");
        }
    }

    #[test]
    fn three_point_rank_separates_circles_from_generic_conics() {
        assert_eq!(dim3_rank(&circle(1.0), 7).unwrap(), 2);
        assert_eq!(dim3_rank(&ellipse(), 7).unwrap(), 3);
        assert_eq!(dim3_rank(&random_curve(3, 8083), 7).unwrap(), 3);
    }

    // --- exact-arithmetic oracle for the circle rank drop -------------------

    type Rat = BigRational;

    fn rat(n: i64, d: i64) -> Rat {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Exact rank by rational row reduction.
    fn exact_rank(mut m: Vec<Vec<Rat>>) -> usize {
        let rows = m.len();
        let cols = m[0].len();
        let mut rank = 0;
        let mut col = 0;
        while rank < rows && col < cols {
            let Some(pivot) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
                col += 1;
                continue;
            };
            m.swap(rank, pivot);
            let p = m[rank][col].clone();
            for r in rank + 1..rows {
                let factor = &m[r][col] / &p;
                for cc in col..cols {
                    let sub = &factor * &m[rank][cc];
                    m[r][cc] = &m[r][cc] - &sub;
                }
            }
            rank += 1;
            col += 1;
        }
        rank
    }

    #[test]
    fn circle_triple_rank_drop_verified_in_exact_arithmetic() {
        // Rational points of x^2 + y^2 = 1 via t -> ((1-t^2), 2t)/(1+t^2);
        // tangent at (x, y) is proportional to (-y, x), also rational.  The
        // 3x3 on-curve Jacobian of (d_12, d_13, d_23) is rational, and its
        // rank in exact arithmetic is 2 — the drop is structural, not
        // numerical.
        let ts = [rat(1, 2), rat(1, 3), rat(2, 5)];
        let pts: Vec<(Rat, Rat)> = ts
            .iter()
            .map(|t| {
                let t2 = t * t;
                let den = &t2 + Rat::one();
                ((Rat::one() - &t2) / &den, (t + t) / &den)
            })
            .collect();
        let tangent = |i: usize| (-&pts[i].1, pts[i].0.clone());
        let mut jac = vec![vec![Rat::zero(); 3]; 3];
        for (row, (i, j)) in [(0usize, 1usize), (0, 2), (1, 2)].into_iter().enumerate() {
            let dx = &pts[i].0 - &pts[j].0;
            let dy = &pts[i].1 - &pts[j].1;
            let two = rat(2, 1);
            let (tix, tiy) = tangent(i);
            let (tjx, tjy) = tangent(j);
            jac[row][i] = (&dx * &tix + &dy * &tiy) * &two;
            jac[row][j] = (&dx * &tjx + &dy * &tjy) * (-&two);
        }
        assert_eq!(exact_rank(jac), 2);

        // The floating-point route agrees at the same tuple.
        let circ = circle(1.0);
        let tuple: Vec<CurvePoint> = [(0.6, 0.8), (0.8, 0.6), (21.0 / 29.0, 20.0 / 29.0)]
            .iter()
            .map(|&(x, y)| pt(x, y))
            .collect();
        for p in &tuple {
            assert!(circ.contains(p, 1e-12));
        }
        let fj = d3_on_curve_jacobian(&circ, &[tuple[0], tuple[1], tuple[2]]);
        assert_eq!(numeric_rank(&fj, RANK_TOL), 2);
    }

    proptest! {
        #[test]
        fn pairwise_distances_match_direct_computation(
            raw in proptest::collection::vec(-2.0f64..2.0, 16)
        ) {
            let tuple: Vec<CurvePoint> = raw
                .chunks_exact(4)
                .map(|c4| CurvePoint::new(c(c4[0], c4[1]), c(c4[2], c4[3])))
                .collect();
            let map = SignatureMap::build(MapId::EuclidJoint, &circle(1.0));
            let sig = map.eval(&tuple).unwrap();
            let mut idx = 0;
            for i in 0..4 {
                for j in i + 1..4 {
                    let dx = tuple[i].x - tuple[j].x;
                    let dy = tuple[i].y - tuple[j].y;
                    let want = dx * dx + dy * dy;
                    prop_assert!((sig[idx] - want).norm() <= 1e-12 * want.norm().max(1.0));
                    idx += 1;
                }
            }
        }
    }
}
