//! Dense complex matrices: LU solves, SVD-based rank and nullspace.
//!
//! The systems here are small (a path-tracking Jacobian tops out around
//! 13 x 13), so a hand-rolled partial-pivot LU keeps the singularity
//! semantics explicit for the tracker; rank and nullspace go through
//! nalgebra's SVD, which is the numerically serious part not worth
//! reimplementing.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{AlgebraError, PIVOT_EPS};
use crate::rng::{complex_unit, seeded};

/// Row-major dense matrix over `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Complex64::default(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from row slices; all rows must share a length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "mul_vec: arity mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "mul_mat: inner dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::default() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Solve the square system `A x = b` by partial-pivot LU elimination.
///
/// Fails with [`AlgebraError::SingularMatrix`] when a pivot falls below
/// [`PIVOT_EPS`] relative to the largest entry of `A` — the tracker treats
/// that as "this Jacobian cannot be trusted", not as a recoverable value.
pub fn solve_linear(a: &Matrix, b: &[Complex64]) -> Result<Vec<Complex64>, AlgebraError> {
    assert_eq!(a.rows, a.cols, "solve_linear: matrix must be square");
    assert_eq!(b.len(), a.rows, "solve_linear: rhs length mismatch");
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(AlgebraError::SingularMatrix);
    }
    let floor = PIVOT_EPS * scale;

    let mut lu = a.data.clone();
    let mut x = b.to_vec();
    let at = |m: &Vec<Complex64>, i: usize, j: usize| m[i * n + j];

    for col in 0..n {
        // Pivot search on column magnitude.
        let (mut best, mut best_mag) = (col, at(&lu, col, col).norm());
        for r in col + 1..n {
            let mag = at(&lu, r, col).norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag < floor {
            return Err(AlgebraError::SingularMatrix);
        }
        if best != col {
            for j in 0..n {
                lu.swap(col * n + j, best * n + j);
            }
            x.swap(col, best);
        }
        let pivot = at(&lu, col, col);
        let xc = x[col];
        for r in col + 1..n {
            let f = at(&lu, r, col) / pivot;
            if f == Complex64::default() {
                continue;
            }
            lu[r * n + col] = f;
            for j in col + 1..n {
                let v = at(&lu, col, j);
                lu[r * n + j] -= f * v;
            }
            x[r] -= f * xc;
        }
    }
    // Back substitution.
    for col in (0..n).rev() {
        let mut v = x[col];
        for j in col + 1..n {
            v -= at(&lu, col, j) * x[j];
        }
        x[col] = v / at(&lu, col, col);
    }
    Ok(x)
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Vec::new();
    }
    let sv = a.to_nalgebra().singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Numerical rank: the number of singular values exceeding
/// `rank_tol * (largest singular value)`.
///
/// A matrix whose largest singular value is itself at most `rank_tol` counts
/// as rank 0 — without that guard an all-noise Jacobian (e.g. the on-curve
/// differential of a constant map) would always report rank >= 1.
pub fn numeric_rank(a: &Matrix, rank_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        None => 0,
        Some(&smax) if smax <= rank_tol => 0,
        Some(&smax) => s.iter().filter(|&&v| v > rank_tol * smax).count(),
    }
}

/// Orthonormal basis of the right nullspace of `a`, using the same rank
/// threshold as [`numeric_rank`].
pub fn nullspace(a: &Matrix, rank_tol: f64) -> Vec<Vec<Complex64>> {
    if a.cols == 0 {
        return Vec::new();
    }
    if a.rows == 0 {
        // Whole space: standard basis.
        return (0..a.cols)
            .map(|j| {
                let mut v = vec![Complex64::default(); a.cols];
                v[j] = Complex64::new(1.0, 0.0);
                v
            })
            .collect();
    }
    // nalgebra computes the thin SVD; pad with zero rows so V comes back
    // square and the kernel directions are present in v_t.
    let mut padded = DMatrix::<Complex64>::zeros(a.rows.max(a.cols), a.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            padded[(i, j)] = self::Matrix::row(a, i)[j];
        }
    }
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let rank = if smax <= rank_tol {
        0
    } else {
        s.iter().filter(|&&v| v > rank_tol * smax).count()
    };
    // Rows of V^T beyond the rank span the kernel; note V^T rows are the
    // conjugated right singular vectors, so conjugate back.
    (rank..vt.nrows())
        .map(|r| (0..a.cols).map(|j| vt[(r, j)].conj()).collect())
        .collect()
}

/// Random unitary matrix (QR of a seeded complex Gaussian-free draw).
/// Utility for rank/invariance testing and generic frame changes.
pub fn random_unitary(n: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    let raw = DMatrix::from_fn(n, n, |_, _| complex_unit(&mut rng));
    let qr = raw.qr();
    let q = qr.q();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = q[(i, j)];
        }
    }
    out
}
