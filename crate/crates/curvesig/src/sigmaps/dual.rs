//! Forward-mode first-order jets over `C`: a value plus `N` directional
//! derivatives, propagated through arithmetic.
//!
//! Signature coordinates are small arithmetic combinations of curve partials
//! evaluated at tuple points.  Expanding them into polynomials in the tuple
//! variables is numerically disastrous — coefficient growth followed by
//! evaluation cancellation — so both values and Jacobians are instead
//! computed by running the combination formulas once over these jets, seeded
//! with exact partial values.  Derivatives come out analytic (no finite
//! differencing) and the arithmetic stays at the well-conditioned value
//! level.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct Dual<const N: usize> {
    pub v: Complex64,
    pub d: [Complex64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: Complex64) -> Self {
        Dual { v, d: [Complex64::default(); N] }
    }

    /// A value that is itself coordinate `slot`: unit derivative there.
    pub fn variable(v: Complex64, slot: usize) -> Self {
        let mut d = [Complex64::default(); N];
        d[slot] = Complex64::new(1.0, 0.0);
        Dual { v, d }
    }

    /// A value with explicitly seeded derivatives.
    pub fn seeded(v: Complex64, seeds: &[(usize, Complex64)]) -> Self {
        let mut d = [Complex64::default(); N];
        for &(slot, dv) in seeds {
            d[slot] = dv;
        }
        Dual { v, d }
    }

    pub fn scale(self, c: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= c;
        }
        Dual { v: self.v * c, d }
    }

    pub fn sq(self) -> Self {
        self * self
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Dual::constant(Complex64::new(1.0, 0.0));
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Dual<N>;
    fn add(self, rhs: Dual<N>) -> Dual<N> {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(rhs.d) {
            *x += y;
        }
        Dual { v: self.v + rhs.v, d }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Dual<N>;
    fn sub(self, rhs: Dual<N>) -> Dual<N> {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(rhs.d) {
            *x -= y;
        }
        Dual { v: self.v - rhs.v, d }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Dual<N>;
    fn mul(self, rhs: Dual<N>) -> Dual<N> {
        let mut d = [Complex64::default(); N];
        for (i, x) in d.iter_mut().enumerate() {
            *x = self.d[i] * rhs.v + self.v * rhs.d[i];
        }
        Dual { v: self.v * rhs.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Dual<N>;
    fn div(self, rhs: Dual<N>) -> Dual<N> {
        let inv2 = rhs.v * rhs.v;
        let mut d = [Complex64::default(); N];
        for (i, x) in d.iter_mut().enumerate() {
            *x = (self.d[i] * rhs.v - self.v * rhs.d[i]) / inv2;
        }
        Dual { v: self.v / rhs.v, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Dual<N>;
    fn neg(self) -> Dual<N> {
        let mut d = self.d;
        for x in &mut d {
            *x = -*x;
        }
        Dual { v: -self.v, d }
    }
}
