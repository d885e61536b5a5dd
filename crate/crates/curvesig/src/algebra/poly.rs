//! Sparse multivariate polynomials over `C`.
//!
//! Terms live in a `BTreeMap` keyed by exponent vectors, so iteration order
//! (and therefore serialization and evaluation order) is the lexicographic
//! order of exponents — deterministic across runs, which the reproducibility
//! guarantees elsewhere rely on.  Canonical form: no explicit zero
//! coefficients, every exponent vector has length `nvars`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One monomial: exponent vector and coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub exp: Vec<u32>,
    pub coeff: Complex64,
}

/// Sparse polynomial in `nvars` complex variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl MultiPoly {
    /// The zero polynomial in `nvars` variables.
    pub fn zero(nvars: usize) -> Self {
        MultiPoly { nvars, terms: BTreeMap::new() }
    }

    /// The constant polynomial `c`.
    pub fn constant(nvars: usize, c: Complex64) -> Self {
        let mut p = MultiPoly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The monomial `x_var`.
    pub fn variable(nvars: usize, var: usize) -> Self {
        assert!(var < nvars, "variable index {var} out of range for {nvars} variables");
        let mut exp = vec![0; nvars];
        exp[var] = 1;
        let mut p = MultiPoly::zero(nvars);
        p.add_term(exp, Complex64::new(1.0, 0.0));
        p
    }

    /// Build from `(exponent, coefficient)` pairs; repeated exponents are
    /// summed, zero coefficients dropped.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, Complex64)>,
    {
        let mut p = MultiPoly::zero(nvars);
        for (exp, c) in terms {
            p.add_term(exp, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Iterate terms in lexicographic exponent order.
    pub fn terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.terms.iter().map(|(e, c)| Term { exp: e.clone(), coeff: *c })
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Largest exponent of variable `var` across all terms.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    /// Largest coefficient magnitude; 0 for the zero polynomial.
    pub fn coeff_scale(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Coefficient of an exponent vector (0 if absent).
    pub fn coeff(&self, exp: &[u32]) -> Complex64 {
        self.terms.get(exp).copied().unwrap_or_default()
    }

    fn add_term(&mut self, exp: Vec<u32>, c: Complex64) {
        assert_eq!(exp.len(), self.nvars, "exponent arity mismatch");
        if c == Complex64::default() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exp) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == Complex64::default() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &MultiPoly) -> MultiPoly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> MultiPoly {
        if c == Complex64::default() {
            return MultiPoly::zero(self.nvars);
        }
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        let mut out = MultiPoly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exp: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(exp, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> MultiPoly {
        let mut out = MultiPoly::constant(self.nvars, Complex64::new(1.0, 0.0));
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Formal partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> MultiPoly {
        assert!(var < self.nvars, "variable index out of range");
        let mut out = MultiPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut exp = e.clone();
            exp[var] -= 1;
            out.add_term(exp, c * Complex64::new(e[var] as f64, 0.0));
        }
        out
    }

    /// Evaluate at a point (length must match `nvars`).
    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        assert_eq!(point.len(), self.nvars, "point arity mismatch");
        let mut acc = Complex64::default();
        for (e, c) in &self.terms {
            let mut m = *c;
            for (x, &k) in point.iter().zip(e) {
                if k > 0 {
                    m *= x.powu(k);
                }
            }
            acc += m;
        }
        acc
    }

    /// Re-embed into a ring with `nvars_out` variables, sending variable `i`
    /// of `self` to variable `var_map[i]`.
    pub fn embed(&self, nvars_out: usize, var_map: &[usize]) -> MultiPoly {
        assert_eq!(var_map.len(), self.nvars, "var_map arity mismatch");
        assert!(var_map.iter().all(|&v| v < nvars_out), "var_map target out of range");
        let mut out = MultiPoly::zero(nvars_out);
        for (e, c) in &self.terms {
            let mut exp = vec![0u32; nvars_out];
            for (i, &k) in e.iter().enumerate() {
                exp[var_map[i]] += k;
            }
            out.add_term(exp, *c);
        }
        out
    }

    /// Substitute each variable by a polynomial (`forms[i]` replaces `x_i`).
    /// All forms must share a variable count, which becomes the output's.
    pub fn compose(&self, forms: &[MultiPoly]) -> MultiPoly {
        assert_eq!(forms.len(), self.nvars, "one form required per variable");
        let nvars_out = forms.first().map_or(0, MultiPoly::nvars);
        assert!(forms.iter().all(|f| f.nvars() == nvars_out), "forms disagree on arity");

        // Cache powers of each form up to the degree actually used.
        let mut pows: Vec<Vec<MultiPoly>> = forms
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let top = self.degree_in(i) as usize;
                let mut v = Vec::with_capacity(top + 1);
                v.push(MultiPoly::constant(nvars_out, Complex64::new(1.0, 0.0)));
                for k in 1..=top {
                    let next = v[k - 1].mul(f);
                    v.push(next);
                }
                v
            })
            .collect();

        let mut out = MultiPoly::zero(nvars_out);
        for (e, c) in &self.terms {
            let mut m = MultiPoly::constant(nvars_out, *c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    m = m.mul(&pows[i][k as usize]);
                }
            }
            out = out.add(&m);
        }
        // Keep the cache alive until here so borrowck sees a single owner.
        pows.clear();
        out
    }

    /// Dense ascending coefficient vector of a univariate polynomial.
    pub fn univariate_coeffs(&self) -> Vec<Complex64> {
        assert_eq!(self.nvars, 1, "univariate_coeffs requires nvars == 1");
        let deg = self.total_degree() as usize;
        let mut c = vec![Complex64::default(); deg + 1];
        for (e, v) in &self.terms {
            c[e[0] as usize] = *v;
        }
        c
    }

    /// Drop terms whose coefficient magnitude is at most `tol` times the
    /// largest coefficient magnitude.  Used after floating-point transforms
    /// where exact cancellation left numeric dust.
    pub fn trim_relative(&self, tol: f64) -> MultiPoly {
        let scale = self.coeff_scale();
        if scale == 0.0 {
            return self.clone();
        }
        MultiPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.norm() > tol * scale)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Divide by the coefficient of the lexicographically largest exponent
    /// among maximal-total-degree terms — a deterministic normalization that
    /// makes proportional polynomials comparable coefficient by coefficient.
    pub fn normalized(&self) -> MultiPoly {
        let Some(lead) = self.leading_exponent() else {
            return self.clone();
        };
        let c = self.terms[&lead];
        self.scale(c.inv())
    }

    fn leading_exponent(&self) -> Option<Vec<u32>> {
        let top = self.total_degree();
        self.terms
            .keys()
            .filter(|e| e.iter().sum::<u32>() == top)
            .max()
            .cloned()
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = ["x", "y", "z", "u", "v", "w"];
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)", c.re, c.im)?;
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let name = names.get(i).map_or_else(|| format!("x{i}"), |s| s.to_string());
                if k == 1 {
                    write!(f, "*{name}")?;
                } else {
                    write!(f, "*{name}^{k}")?;
                }
            }
        }
        Ok(())
    }
}

// --- external JSON format ----------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermWire {
    exp: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyWire {
    nvars: usize,
    terms: Vec<TermWire>,
}

impl Serialize for MultiPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let wire = PolyWire {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermWire { exp: e.clone(), re: c.re, im: c.im })
                .collect(),
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = PolyWire::deserialize(d)?;
        for t in &wire.terms {
            if t.exp.len() != wire.nvars {
                return Err(D::Error::custom(format!(
                    "term exponent arity {} does not match nvars {}",
                    t.exp.len(),
                    wire.nvars
                )));
            }
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(D::Error::custom("non-finite coefficient"));
            }
        }
        Ok(MultiPoly::from_terms(
            wire.nvars,
            wire.terms.into_iter().map(|t| (t.exp, Complex64::new(t.re, t.im))),
        ))
    }
}

// --- batch evaluation ----------------------------------------------------

/// Reusable scratch for evaluating many polynomials at one point.
///
/// Tracking evaluates the same families of polynomials at every predictor and
/// corrector step; building per-variable power tables once per point turns
/// each term into two multiplications regardless of its degree.
#[derive(Debug, Default)]
pub struct PowerTable {
    pows: Vec<Vec<Complex64>>,
}

impl PowerTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Prepare tables for `point`, with `max_degs[i]` the largest exponent
    /// of variable `i` that will be requested.
    pub fn prepare(&mut self, point: &[Complex64], max_degs: &[u32]) {
        assert_eq!(point.len(), max_degs.len());
        self.pows.resize_with(point.len(), Vec::new);
        for (i, (&x, &d)) in point.iter().zip(max_degs).enumerate() {
            let col = &mut self.pows[i];
            col.clear();
            col.push(Complex64::new(1.0, 0.0));
            for k in 1..=d as usize {
                let prev = col[k - 1];
                col.push(prev * x);
            }
        }
    }

    /// Evaluate `p` using the prepared tables.  `p`'s per-variable degrees
    /// must not exceed those passed to [`PowerTable::prepare`].
    pub fn eval(&self, p: &MultiPoly) -> Complex64 {
        let mut acc = Complex64::default();
        for (e, c) in &p.terms {
            let mut m = *c;
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    m *= self.pows[i][k as usize];
                }
            }
            acc += m;
        }
        acc
    }
}
