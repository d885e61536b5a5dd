//! Complex Euclidean and equi-affine motions of the plane.
//!
//! A Euclidean element acts by translate-then-rotate:
//! `p -> R (p + T)` with `R = [[c, -eps*s], [s, eps*c]]`, `c^2 + s^2 = 1` and
//! `eps = -1` marking the reflection coset.  These are exactly the complex
//! orthogonal 2x2 matrices, so inverses are transposes and composition stays
//! in the family.  The equi-affine variant replaces `R` by any determinant-1
//! matrix.
//!
//! The constructive heart of the module is [`moving_frame`]: the unique
//! rotation+translation sending a non-isotropic pair `(p1, p2)` to
//! `((0,0), (0, sqrt(d12)))`.  Frames normalize both tuples inside
//! [`recover_element`], which then needs to try at most four axis
//! reflections to line the normalized tuples up — that bounded search is
//! what makes symmetry-group elements recoverable from matched witness
//! tuples.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::curves::{dist_sq, CurvePoint, W_EPS};
use crate::rng::{complex_unit, seeded, SigRng};
use crate::wire::{c_in, c_out};

/// Construction-time tolerance on the defining algebraic invariants
/// (`c^2 + s^2 = 1`, `det = 1`).
pub const GROUP_CONSTRUCTION_TOL: f64 = 1e-12;

/// Largest `|c|` accepted when sampling a random Euclidean element.
/// Complex rotations are unbounded; capping the magnitude keeps the
/// coefficient growth of transformed curves within the range where path
/// tracking recovers complete witness fibers (see `witness`).
pub const ROTATION_MAGNITUDE_CAP: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroupError {
    #[error("rotation parameters violate c^2 + s^2 = 1 (residual {0:.3e})")]
    NotOrthogonal(f64),
    #[error("linear part violates det = 1 (residual {0:.3e})")]
    NotUnimodular(f64),
    #[error("reflection sign must be +1 or -1, got {0}")]
    BadReflectionSign(i8),
    #[error("point pair is isotropic: squared chord magnitude <= {W_EPS:e}")]
    IsotropicPair,
    #[error("tuples disagree on pairwise squared distances")]
    InvariantMismatch,
    #[error("no Euclidean motion maps one tuple onto the other at tolerance")]
    NoMatch,
}

/// Complex Euclidean motion `p -> R (p + T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanElement {
    /// Cosine-like rotation parameter.
    pub c: Complex64,
    /// Sine-like rotation parameter.
    pub s: Complex64,
    /// `+1` for rotations, `-1` for reflections (determinant of `R`).
    pub eps: i8,
    /// Translation applied before the rotation, x component.
    pub a: Complex64,
    /// Translation applied before the rotation, y component.
    pub b: Complex64,
}

impl EuclideanElement {
    pub fn new(
        c: Complex64,
        s: Complex64,
        eps: i8,
        a: Complex64,
        b: Complex64,
    ) -> Result<Self, GroupError> {
        if eps != 1 && eps != -1 {
            return Err(GroupError::BadReflectionSign(eps));
        }
        let resid = (c * c + s * s - 1.0).norm();
        if resid > GROUP_CONSTRUCTION_TOL {
            return Err(GroupError::NotOrthogonal(resid));
        }
        Ok(EuclideanElement { c, s, eps, a, b })
    }

    pub fn identity() -> Self {
        EuclideanElement {
            c: Complex64::new(1.0, 0.0),
            s: Complex64::default(),
            eps: 1,
            a: Complex64::default(),
            b: Complex64::default(),
        }
    }

    /// Reflection across the y-axis: `(x, y) -> (-x, y)`.
    pub fn reflect_y_axis() -> Self {
        EuclideanElement {
            c: Complex64::new(-1.0, 0.0),
            s: Complex64::default(),
            eps: -1,
            a: Complex64::default(),
            b: Complex64::default(),
        }
    }

    /// Reflection across the x-axis: `(x, y) -> (x, -y)`.
    pub fn reflect_x_axis() -> Self {
        EuclideanElement {
            c: Complex64::new(1.0, 0.0),
            s: Complex64::default(),
            eps: -1,
            a: Complex64::default(),
            b: Complex64::default(),
        }
    }

    /// Rotation by a half turn: `(x, y) -> (-x, -y)`.
    pub fn half_turn() -> Self {
        EuclideanElement {
            c: Complex64::new(-1.0, 0.0),
            s: Complex64::default(),
            eps: 1,
            a: Complex64::default(),
            b: Complex64::default(),
        }
    }

    /// Rotation matrix `R = [[c, -eps*s], [s, eps*c]]`, row major.
    pub fn linear(&self) -> [[Complex64; 2]; 2] {
        let e = f64::from(self.eps);
        [[self.c, -self.s * e], [self.s, self.c * e]]
    }

    pub fn act(&self, p: &CurvePoint) -> CurvePoint {
        let u = p.x + self.a;
        let v = p.y + self.b;
        let e = f64::from(self.eps);
        CurvePoint {
            x: self.c * u - self.s * v * e,
            y: self.s * u + self.c * v * e,
        }
    }

    /// Composition `self o other`: act by `other` first.
    pub fn compose(&self, other: &EuclideanElement) -> EuclideanElement {
        let e1 = f64::from(self.eps);
        let e2 = f64::from(other.eps);
        // R = R_self * R_other, read back in (c, s, eps) form.
        let c = self.c * other.c - self.s * other.s * e1;
        let s = self.s * other.c + self.c * other.s * e1;
        // T = T_other + R_other^T * T_self (complex orthogonal inverse).
        let a = other.a + other.c * self.a + other.s * self.b;
        let b = other.b + (other.c * self.b - other.s * self.a) * e2;
        EuclideanElement { c, s, eps: self.eps * other.eps, a, b }
    }

    pub fn inverse(&self) -> EuclideanElement {
        let e = f64::from(self.eps);
        // R' = R^T; T' = -R T.
        let a = -(self.c * self.a - self.s * self.b * e);
        let b = -(self.s * self.a + self.c * self.b * e);
        EuclideanElement { c: self.c, s: -self.s * e, eps: self.eps, a, b }
    }

    /// Random element: rational rotation parameterization
    /// `c = (1 - t^2)/(1 + t^2)`, `s = 2t/(1 + t^2)` over a complex draw
    /// `t`, uniform reflection sign, bounded translation.
    ///
    /// Draws with `t` near `±i` produce unbounded "rotation" entries, and
    /// transforming a curve by such an element inflates its coefficients
    /// exponentially in the degree. Samples are rejected until
    /// `|c| <= ROTATION_MAGNITUDE_CAP`, which keeps transformed curves
    /// numerically tame (roughly a third of the unit-box draws are retried).
    pub fn random(rng: &mut SigRng) -> EuclideanElement {
        use rand::Rng;
        let (c, s) = loop {
            let t = complex_unit(rng);
            let denom = t * t + 1.0;
            if denom.norm() < 1e-6 {
                continue;
            }
            let c = (1.0 - t * t) / denom;
            if c.norm() <= ROTATION_MAGNITUDE_CAP {
                break (c, 2.0 * t / denom);
            }
        };
        let eps = if rng.gen_bool(0.5) { 1 } else { -1 };
        let a = complex_unit(rng);
        let b = complex_unit(rng);
        EuclideanElement { c, s, eps, a, b }
    }
}

/// Equi-affine motion `p -> M (p + T)` with `det M = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquiAffineElement {
    /// Linear part, row major, determinant 1.
    pub m: [[Complex64; 2]; 2],
    pub a: Complex64,
    pub b: Complex64,
}

impl EquiAffineElement {
    pub fn new(m: [[Complex64; 2]; 2], a: Complex64, b: Complex64) -> Result<Self, GroupError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let resid = (det - 1.0).norm();
        if resid > GROUP_CONSTRUCTION_TOL {
            return Err(GroupError::NotUnimodular(resid));
        }
        Ok(EquiAffineElement { m, a, b })
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::default();
        EquiAffineElement { m: [[one, zero], [zero, one]], a: zero, b: zero }
    }

    pub fn act(&self, p: &CurvePoint) -> CurvePoint {
        let u = p.x + self.a;
        let v = p.y + self.b;
        CurvePoint {
            x: self.m[0][0] * u + self.m[0][1] * v,
            y: self.m[1][0] * u + self.m[1][1] * v,
        }
    }

    /// Inverse of the determinant-1 linear part (the adjugate).
    fn linear_inverse(&self) -> [[Complex64; 2]; 2] {
        [[self.m[1][1], -self.m[0][1]], [-self.m[1][0], self.m[0][0]]]
    }

    pub fn compose(&self, other: &EquiAffineElement) -> EquiAffineElement {
        let m1 = &self.m;
        let m2 = &other.m;
        let m = [
            [
                m1[0][0] * m2[0][0] + m1[0][1] * m2[1][0],
                m1[0][0] * m2[0][1] + m1[0][1] * m2[1][1],
            ],
            [
                m1[1][0] * m2[0][0] + m1[1][1] * m2[1][0],
                m1[1][0] * m2[0][1] + m1[1][1] * m2[1][1],
            ],
        ];
        // T = T_other + M_other^{-1} T_self.
        let inv2 = other.linear_inverse();
        let a = other.a + inv2[0][0] * self.a + inv2[0][1] * self.b;
        let b = other.b + inv2[1][0] * self.a + inv2[1][1] * self.b;
        EquiAffineElement { m, a, b }
    }

    pub fn inverse(&self) -> EquiAffineElement {
        let inv = self.linear_inverse();
        let a = -(self.m[0][0] * self.a + self.m[0][1] * self.b);
        let b = -(self.m[1][0] * self.a + self.m[1][1] * self.b);
        EquiAffineElement { m: inv, a, b }
    }

    pub fn random(rng: &mut SigRng) -> EquiAffineElement {
        let m = loop {
            let m = [
                [complex_unit(rng), complex_unit(rng)],
                [complex_unit(rng), complex_unit(rng)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.norm() > 0.2 {
                // Rescale to determinant exactly 1 (principal square root).
                let r = det.sqrt();
                break [
                    [m[0][0] / r, m[0][1] / r],
                    [m[1][0] / r, m[1][1] / r],
                ];
            }
        };
        EquiAffineElement { m, a: complex_unit(rng), b: complex_unit(rng) }
    }
}

/// Either kind of motion, as stored in element files and applied to curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupElement {
    Euclidean(EuclideanElement),
    EquiAffine(EquiAffineElement),
}

impl GroupElement {
    pub fn act(&self, p: &CurvePoint) -> CurvePoint {
        match self {
            GroupElement::Euclidean(g) => g.act(p),
            GroupElement::EquiAffine(g) => g.act(p),
        }
    }

    pub fn act_tuple(&self, tuple: &[CurvePoint]) -> Vec<CurvePoint> {
        tuple.iter().map(|p| self.act(p)).collect()
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Euclidean(g) => GroupElement::Euclidean(g.inverse()),
            GroupElement::EquiAffine(g) => GroupElement::EquiAffine(g.inverse()),
        }
    }

    /// The inverse motion as a plain affine map `q -> N q + t`, the form
    /// substituted into a curve polynomial by `curves::transform`.
    pub fn inverse_affine(&self) -> ([[Complex64; 2]; 2], [Complex64; 2]) {
        match self {
            GroupElement::Euclidean(g) => {
                let e = f64::from(g.eps);
                // R^T, then subtract T.
                let n = [[g.c, g.s], [-g.s * e, g.c * e]];
                (n, [-g.a, -g.b])
            }
            GroupElement::EquiAffine(g) => (g.linear_inverse(), [-g.a, -g.b]),
        }
    }

    pub fn random_euclidean(seed: u64) -> GroupElement {
        GroupElement::Euclidean(EuclideanElement::random(&mut seeded(seed)))
    }

    pub fn random_equiaffine(seed: u64) -> GroupElement {
        GroupElement::EquiAffine(EquiAffineElement::random(&mut seeded(seed)))
    }
}

/// The rotation+translation sending `p1` to the origin and `p2` onto the
/// positive-branch point `(0, sqrt(d12))` of the y-axis.
pub fn moving_frame(p1: &CurvePoint, p2: &CurvePoint) -> Result<EuclideanElement, GroupError> {
    let d12 = dist_sq(p1, p2);
    if d12.norm() <= W_EPS {
        return Err(GroupError::IsotropicPair);
    }
    let r = d12.sqrt();
    Ok(EuclideanElement {
        c: (p2.y - p1.y) / r,
        s: (p2.x - p1.x) / r,
        eps: 1,
        a: -p1.x,
        b: -p1.y,
    })
}

/// The two Euclidean motions fixing both points of a non-isotropic pair:
/// the identity and the reflection across the chord line.
pub fn stabilizer(
    p1: &CurvePoint,
    p2: &CurvePoint,
) -> Result<[EuclideanElement; 2], GroupError> {
    let frame = moving_frame(p1, p2)?;
    let r = frame
        .inverse()
        .compose(&EuclideanElement::reflect_y_axis())
        .compose(&frame);
    Ok([EuclideanElement::identity(), r])
}

/// Recover a Euclidean motion `g` with `g(q_i) ~= p_i` from two tuples with
/// matching pairwise invariants.
///
/// Both tuples are pushed into the chord frame of their first two points;
/// the frames agree up to a reflection about either axis (branch choices in
/// the square root plus the mirror ambiguity), so at most four candidates
/// are checked against every point.
pub fn recover_element(
    p: &[CurvePoint],
    q: &[CurvePoint],
    tol: f64,
) -> Result<EuclideanElement, GroupError> {
    assert_eq!(p.len(), q.len(), "tuples must share arity");
    assert!(p.len() >= 2, "need at least two points to build a frame");

    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let dp = dist_sq(&p[i], &p[j]);
            let dq = dist_sq(&q[i], &q[j]);
            if (dp - dq).norm() > tol * dp.norm().max(dq.norm()).max(1.0) {
                return Err(GroupError::InvariantMismatch);
            }
        }
    }

    let fp = moving_frame(&p[0], &p[1])?;
    let fq = moving_frame(&q[0], &q[1])?;
    let fp_inv = fp.inverse();
    let candidates = [
        EuclideanElement::identity(),
        EuclideanElement::reflect_y_axis(),
        EuclideanElement::reflect_x_axis(),
        EuclideanElement::half_turn(),
    ];
    for mirror in candidates {
        let g = fp_inv.compose(&mirror).compose(&fq);
        let ok = p.iter().zip(q).all(|(pi, qi)| {
            let img = g.act(qi);
            let err = (img.x - pi.x).norm().max((img.y - pi.y).norm());
            err <= tol * pi.max_abs().max(1.0)
        });
        if ok {
            return Ok(g);
        }
    }
    Err(GroupError::NoMatch)
}

// --- external format ------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ElementWire {
    Euclidean {
        c: [f64; 2],
        s: [f64; 2],
        eps: i8,
        a: [f64; 2],
        b: [f64; 2],
    },
    EquiAffine {
        m: [[f64; 2]; 4],
        a: [f64; 2],
        b: [f64; 2],
    },
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let wire = match self {
            GroupElement::Euclidean(g) => ElementWire::Euclidean {
                c: c_out(g.c),
                s: c_out(g.s),
                eps: g.eps,
                a: c_out(g.a),
                b: c_out(g.b),
            },
            GroupElement::EquiAffine(g) => ElementWire::EquiAffine {
                m: [c_out(g.m[0][0]), c_out(g.m[0][1]), c_out(g.m[1][0]), c_out(g.m[1][1])],
                a: c_out(g.a),
                b: c_out(g.b),
            },
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let el = match ElementWire::deserialize(d)? {
            ElementWire::Euclidean { c, s, eps, a, b } => {
                GroupElement::Euclidean(
                    EuclideanElement::new(
                        c_in(c).map_err(D::Error::custom)?,
                        c_in(s).map_err(D::Error::custom)?,
                        eps,
                        c_in(a).map_err(D::Error::custom)?,
                        c_in(b).map_err(D::Error::custom)?,
                    )
                    .map_err(D::Error::custom)?,
                )
            }
            ElementWire::EquiAffine { m, a, b } => {
                let conv = |p: [f64; 2]| c_in(p).map_err(D::Error::custom);
                GroupElement::EquiAffine(
                    EquiAffineElement::new(
                        [[conv(m[0])?, conv(m[1])?], [conv(m[2])?, conv(m[3])?]],
                        conv(a)?,
                        conv(b)?,
                    )
                    .map_err(D::Error::custom)?,
                )
            }
        };
        Ok(el)
    }
}
