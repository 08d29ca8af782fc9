//! Small dense linear algebra: a column-major [`Matrix`], Cholesky
//! factorization with triangular solves, and a cyclic Jacobi eigenvalue
//! routine used by the test oracles.
//!
//! Layout: every matrix is stored column-major, entry `(i, j)` at
//! `data[i + j * rows]`. Columns of a `d x q` sketch are therefore
//! contiguous slices, which is what the curvature recursions iterate over.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix is not positive definite: pivot {pivot:e} at column {column} <= tolerance {tolerance:e}")]
    NotPositiveDefinite { column: usize, pivot: f64, tolerance: f64 },
}

fn mismatch(expected: impl Into<String>, found: impl Into<String>) -> LinalgError {
    LinalgError::DimensionMismatch {
        expected: expected.into(),
        found: found.into(),
    }
}

/// Dense column-major matrix of finite `f64` entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.5e} ", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            m.data[i + i * dim] = 1.0;
        }
        m
    }

    /// Wraps column-major storage. Rejects wrong lengths and non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(mismatch(
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices; convenient for literals in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(mismatch(format!("{ncols} columns"), format!("{} columns", bad.len())));
        }
        Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, LinalgError> {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix::from_col_major(rows, cols, data)
    }

    /// Stacks equal-length vectors as columns.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self, LinalgError> {
        let rows = columns.first().map_or(0, |c| c.len());
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(mismatch(format!("{rows} rows"), format!("{} rows", c.len())));
            }
            data.extend_from_slice(c);
        }
        Matrix::from_col_major(rows, columns.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[j + i * self.cols] = self.get(i, j);
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(mismatch(
                format!("{} rows on the right", self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in other.col(j).iter().enumerate() {
                if b != 0.0 {
                    axpy(b, self.col(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other` without forming the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.rows != other.rows {
            return Err(mismatch(
                format!("{} rows on the right", self.rows),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            for i in 0..self.cols {
                out.data[i + j * self.cols] = dot(self.col(i), other.col(j));
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.cols {
            return Err(mismatch(
                format!("vector of length {}", self.cols),
                format!("length {}", v.len()),
            ));
        }
        let mut out = vec![0.0; self.rows];
        for (j, &c) in v.iter().enumerate() {
            if c != 0.0 {
                axpy(c, self.col(j), &mut out);
            }
        }
        Ok(out)
    }

    /// `self^T * v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.rows {
            return Err(mismatch(
                format!("vector of length {}", self.rows),
                format!("length {}", v.len()),
            ));
        }
        Ok((0..self.cols).map(|j| dot(self.col(j), v)).collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix, LinalgError> {
        if self.shape() != other.shape() {
            return Err(mismatch(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// `(A + A^T) / 2`; square matrices only.
    pub fn symmetrized(&self) -> Result<Matrix, LinalgError> {
        if self.rows != self.cols {
            return Err(mismatch("square matrix", format!("{}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut out = self.clone();
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, avg);
                out.set(j, i, avg);
            }
        }
        Ok(out)
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`, with its location.
    fn asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for j in 0..self.cols {
            for i in 0..j {
                let gap = (self.get(i, j) - self.get(j, i)).abs();
                if gap > worst.2 || gap.is_nan() {
                    worst = (i, j, gap);
                }
            }
        }
        worst
    }

    fn require_symmetric(&self, tolerance: f64) -> Result<(), LinalgError> {
        if self.rows != self.cols {
            return Err(mismatch("square matrix", format!("{}x{}", self.rows, self.cols)));
        }
        let (row, col, gap) = self.asymmetry();
        if gap > tolerance || gap.is_nan() {
            return Err(LinalgError::NotSymmetric { row, col, gap });
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Absolute tolerance on `|a_ij - a_ji|` accepted by [`cholesky`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Relative pivot tolerance: pivots at or below `PIVOT_TOLERANCE * max_i a_ii` fail.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Lower-triangular `R` with positive diagonal such that `R R^T = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangularFactor {
    dim: usize,
    // column-major dim x dim; strictly-upper entries are zero
    data: Vec<f64>,
}

/// Factorizes a symmetric positive-definite matrix with the default pivot tolerance.
pub fn cholesky(a: &Matrix) -> Result<LowerTriangularFactor, LinalgError> {
    cholesky_with_tolerance(a, PIVOT_TOLERANCE)
}

pub fn cholesky_with_tolerance(
    a: &Matrix,
    relative_pivot_tolerance: f64,
) -> Result<LowerTriangularFactor, LinalgError> {
    a.require_symmetric(SYMMETRY_TOLERANCE)?;
    let n = a.rows();
    let max_diag = (0..n).map(|i| a.get(i, i)).fold(0.0_f64, f64::max);
    let tolerance = relative_pivot_tolerance * max_diag;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        // Only the lower triangle of `a` is read.
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= l[j + k * n] * l[j + k * n];
        }
        if pivot.is_nan() || pivot <= tolerance || max_diag <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite {
                column: j,
                pivot,
                tolerance,
            });
        }
        let diag = pivot.sqrt();
        l[j + j * n] = diag;
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i + k * n] * l[j + k * n];
            }
            l[i + j * n] = s / diag;
        }
    }
    Ok(LowerTriangularFactor { dim: n, data: l })
}

impl LowerTriangularFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.dim]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    /// `R R^T`, the factored matrix.
    pub fn reconstruct(&self) -> Matrix {
        let r = self.to_matrix();
        r.matmul(&r.transpose()).expect("square factor")
    }

    /// Solves `R x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        debug_assert_eq!(b.len(), n);
        for j in 0..n {
            b[j] /= self.data[j + j * n];
            let bj = b[j];
            let col = &self.data[j * n..(j + 1) * n];
            for (bi, &r) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
                *bi -= r * bj;
            }
        }
    }

    /// Solves `R^T x = b` in place.
    pub fn solve_upper_transposed_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        debug_assert_eq!(b.len(), n);
        for j in (0..n).rev() {
            // row j of R^T is column j of R
            let col = &self.data[j * n..(j + 1) * n];
            let s = b[j] - b[j + 1..].iter().zip(&col[j + 1..]).map(|(x, r)| r * x).sum::<f64>();
            b[j] = s / col[j];
        }
    }

    /// Applies `(R R^T)^{-1}` to `b` in place by two triangular solves.
    pub fn solve_vec_in_place(&self, b: &mut [f64]) {
        self.solve_lower_in_place(b);
        self.solve_upper_transposed_in_place(b);
    }

    /// `R^{-T}`, an upper-triangular matrix `U` with `U U^T = (R R^T)^{-1}`.
    pub fn inverse_transpose(&self) -> Matrix {
        let n = self.dim;
        let mut u = Matrix::identity(n);
        for j in 0..n {
            self.solve_upper_transposed_in_place(u.col_mut(j));
        }
        u
    }
}

/// Solves `(R R^T) X = B` column by column without forming the inverse.
pub fn solve_with_factor(r: &LowerTriangularFactor, b: &Matrix) -> Result<Matrix, LinalgError> {
    if b.rows() != r.dim() {
        return Err(mismatch(
            format!("{} rows", r.dim()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    let mut x = b.clone();
    for j in 0..x.cols() {
        r.solve_vec_in_place(x.col_mut(j));
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations. Intended for oracle checks on matrices up to ~1000 rows.
pub fn sym_eigenvalues(a: &Matrix) -> Result<Vec<f64>, LinalgError> {
    let scale = a.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    a.require_symmetric(SYMMETRY_TOLERANCE * scale)?;
    let n = a.rows();
    let mut m = a.symmetrized()?;
    let total = m.frobenius_norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}
