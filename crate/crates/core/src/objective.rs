//! Finite-sum objectives `f(w) = (1/n) sum_i f_i(w)` with subsampled
//! gradients and subsampled Hessian actions.
//!
//! [`LogisticModel`] is the L2-regularized logistic loss. [`QuadraticModel`]
//! is a shared-Hessian quadratic with known curvature constants, used to
//! exercise the theory bounds.

use thiserror::Error;

use crate::dataset::Dataset;
use crate::linalg::{self, LinalgError, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("subsample is empty")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("regularization must be positive and finite, got {0}")]
    BadRegularization(f64),
    #[error("dataset has no examples")]
    EmptyDataset,
    #[error("sample position {index} out of range for {n} examples")]
    IndexOutOfRange { index: usize, n: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A finite-sum objective that can be subsampled.
///
/// Sample slices hold zero-based example positions; the sample mean is
/// always taken over `sample.len()` terms.
pub trait Objective: Sync {
    fn num_examples(&self) -> usize;

    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> Result<f64, ObjectiveError>;

    /// Writes `grad f_S(w)` into `out`.
    fn subsampled_gradient_into(&self, w: &[f64], sample: &[usize], out: &mut [f64]) -> Result<(), ObjectiveError>;

    /// `grad^2 f_T(w) * D` without forming the `d x d` Hessian.
    fn hessian_action(&self, w: &[f64], sample: &[usize], directions: &Matrix) -> Result<Matrix, ObjectiveError>;

    /// `(lambda, Lambda)` with `lambda I <= grad^2 f_T(x) <= Lambda I` for all `T`, `x`.
    fn smoothness_constants(&self) -> (f64, f64);

    fn subsampled_gradient(&self, w: &[f64], sample: &[usize]) -> Result<Vec<f64>, ObjectiveError> {
        let mut out = vec![0.0; self.dim()];
        self.subsampled_gradient_into(w, sample, &mut out)?;
        Ok(out)
    }

    fn full_gradient(&self, w: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        let all: Vec<usize> = (0..self.num_examples()).collect();
        self.subsampled_gradient(w, &all)
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), ObjectiveError> {
    if expected != found {
        return Err(ObjectiveError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_sample(sample: &[usize], n: usize) -> Result<(), ObjectiveError> {
    if sample.is_empty() {
        return Err(ObjectiveError::EmptySample);
    }
    if let Some(&index) = sample.iter().find(|&&i| i >= n) {
        return Err(ObjectiveError::IndexOutOfRange { index, n });
    }
    Ok(())
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic function `1 / (1 + exp(-x))`, evaluated on the stable branch.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `f_i(w) = ln(1 + exp(-y_i <a_i, w>)) + (reg/2) ||w||^2`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticModel<'a> {
    data: &'a Dataset,
    reg: f64,
}

impl<'a> LogisticModel<'a> {
    pub fn new(data: &'a Dataset, reg: f64) -> Result<Self, ObjectiveError> {
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(ObjectiveError::BadRegularization(reg));
        }
        if data.n() == 0 {
            return Err(ObjectiveError::EmptyDataset);
        }
        Ok(LogisticModel { data, reg })
    }

    /// Regularization `1/n`.
    pub fn with_default_reg(data: &'a Dataset) -> Result<Self, ObjectiveError> {
        if data.n() == 0 {
            return Err(ObjectiveError::EmptyDataset);
        }
        LogisticModel::new(data, 1.0 / data.n() as f64)
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }
}

impl Objective for LogisticModel<'_> {
    fn num_examples(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, w: &[f64]) -> Result<f64, ObjectiveError> {
        check_len(self.dim(), w.len())?;
        let loss: f64 = self
            .data
            .examples()
            .iter()
            .zip(self.data.labels())
            .map(|(a, &y)| softplus(-y * a.dot(w)))
            .sum();
        Ok(loss / self.data.n() as f64 + 0.5 * self.reg * linalg::dot(w, w))
    }

    fn subsampled_gradient_into(&self, w: &[f64], sample: &[usize], out: &mut [f64]) -> Result<(), ObjectiveError> {
        check_len(self.dim(), w.len())?;
        check_len(self.dim(), out.len())?;
        check_sample(sample, self.data.n())?;
        out.fill(0.0);
        let inv = 1.0 / sample.len() as f64;
        for &i in sample {
            let a = self.data.example(i);
            let y = self.data.label(i);
            let coef = -y * sigmoid(-y * a.dot(w));
            a.axpy_into(coef * inv, out);
        }
        linalg::axpy(self.reg, w, out);
        Ok(())
    }

    fn hessian_action(&self, w: &[f64], sample: &[usize], directions: &Matrix) -> Result<Matrix, ObjectiveError> {
        let d = self.dim();
        check_len(d, w.len())?;
        check_len(d, directions.rows())?;
        check_sample(sample, self.data.n())?;
        let q = directions.cols();
        let inv = 1.0 / sample.len() as f64;
        let mut out = directions.scale(self.reg);
        let mut row = vec![0.0; q];
        for &i in sample {
            let a = self.data.example(i);
            let z = a.dot(w);
            let weight = sigmoid(z) * sigmoid(-z) * inv;
            // row = weight * a^T D, then out += a * row
            for (j, r) in row.iter_mut().enumerate() {
                *r = weight * a.dot(directions.col(j));
            }
            for (j, &r) in row.iter().enumerate() {
                if r != 0.0 {
                    a.axpy_into(r, out.col_mut(j));
                }
            }
        }
        Ok(out)
    }

    fn smoothness_constants(&self) -> (f64, f64) {
        (self.reg, self.reg + 0.25 * self.data.max_squared_norm())
    }
}

/// `f_i(x) = (1/2) (x - c_i)^T A (x - c_i)` with one SPD `A` shared by all terms,
/// so every subsampled Hessian equals `A`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    hessian: Matrix,
    centers: Vec<Vec<f64>>,
    lambda: f64,
    big_lambda: f64,
}

impl QuadraticModel {
    pub fn new(hessian: Matrix, centers: Vec<Vec<f64>>) -> Result<Self, ObjectiveError> {
        let d = hessian.rows();
        check_len(d, hessian.cols())?;
        if centers.is_empty() {
            return Err(ObjectiveError::EmptyDataset);
        }
        for c in &centers {
            check_len(d, c.len())?;
        }
        linalg::cholesky(&hessian)?;
        let eig = linalg::sym_eigenvalues(&hessian)?;
        Ok(QuadraticModel {
            lambda: eig[0],
            big_lambda: eig[d - 1],
            hessian,
            centers,
        })
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// The unique minimizer, the mean of the centers.
    pub fn minimizer(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.hessian.rows()];
        for c in &self.centers {
            linalg::axpy(1.0 / self.centers.len() as f64, c, &mut m);
        }
        m
    }
}

impl Objective for QuadraticModel {
    fn num_examples(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.hessian.rows()
    }

    fn value(&self, w: &[f64]) -> Result<f64, ObjectiveError> {
        check_len(self.dim(), w.len())?;
        let mut total = 0.0;
        let mut diff = vec![0.0; w.len()];
        for c in &self.centers {
            for ((d, x), c) in diff.iter_mut().zip(w).zip(c) {
                *d = x - c;
            }
            total += 0.5 * linalg::dot(&diff, &self.hessian.mul_vec(&diff)?);
        }
        Ok(total / self.centers.len() as f64)
    }

    fn subsampled_gradient_into(&self, w: &[f64], sample: &[usize], out: &mut [f64]) -> Result<(), ObjectiveError> {
        check_len(self.dim(), w.len())?;
        check_len(self.dim(), out.len())?;
        check_sample(sample, self.centers.len())?;
        let mut shift = w.to_vec();
        let inv = 1.0 / sample.len() as f64;
        for &i in sample {
            linalg::axpy(-inv, &self.centers[i], &mut shift);
        }
        out.copy_from_slice(&self.hessian.mul_vec(&shift)?);
        Ok(())
    }

    fn hessian_action(&self, w: &[f64], sample: &[usize], directions: &Matrix) -> Result<Matrix, ObjectiveError> {
        check_len(self.dim(), w.len())?;
        check_sample(sample, self.centers.len())?;
        Ok(self.hessian.matmul(directions)?)
    }

    fn smoothness_constants(&self) -> (f64, f64) {
        (self.lambda, self.big_lambda)
    }
}

/// Dense `grad^2 f_T(w)`, built column by column from Hessian actions.
/// Test and oracle use only.
pub fn dense_hessian<O: Objective + ?Sized>(model: &O, w: &[f64], sample: &[usize]) -> Result<Matrix, ObjectiveError> {
    model.hessian_action(w, sample, &Matrix::identity(model.dim()))
}
