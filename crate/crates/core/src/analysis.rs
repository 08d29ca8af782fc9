//! Executable versions of the convergence theory: spectral bounds on the
//! limited-memory metric, the linear rate of the method with a random
//! reference iterate, and an exact check of the variance bound on the SVRG
//! gradient.

use thiserror::Error;

use crate::linalg::{self, cholesky, Matrix};
use crate::objective::{dense_hessian, Objective, ObjectiveError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need 0 < lambda <= Lambda and finite norms, got lambda = {lambda}, Lambda = {big_lambda}")]
    BadConstants { lambda: f64, big_lambda: f64 },
    #[error("stepsize {eta} must be below {threshold}")]
    StepTooLarge { eta: f64, threshold: f64 },
    #[error("inner loop length {m} below the required {m_min}")]
    InnerLoopTooShort { m: usize, m_min: f64 },
    #[error("C({n}, {s}) subsets exceed the enumeration limit {limit}")]
    TooManySubsets { n: usize, s: usize, limit: u64 },
    #[error("reference optimum has gradient norm {norm:e} > {tolerance:e}")]
    OptimumNotConverged { norm: f64, tolerance: f64 },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Curvature constants together with the metric's spectral bounds
/// `gamma_lb I <= H_t <= gamma_ub I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryBounds {
    pub lambda: f64,
    pub big_lambda: f64,
    pub kappa: f64,
    pub memory: usize,
    pub gamma_lb: f64,
    pub gamma_ub: f64,
}

impl TheoryBounds {
    /// Bounds given directly, bypassing [`metric_bounds`]; for exploring the
    /// rate formula with chosen constants.
    pub fn from_constants(lambda: f64, big_lambda: f64, gamma_lb: f64, gamma_ub: f64) -> Result<Self, AnalysisError> {
        check_constants(lambda, big_lambda)?;
        if !(gamma_lb > 0.0 && gamma_ub >= gamma_lb && gamma_ub.is_finite()) {
            return Err(AnalysisError::BadConstants { lambda, big_lambda });
        }
        Ok(TheoryBounds {
            lambda,
            big_lambda,
            kappa: big_lambda / lambda,
            memory: 0,
            gamma_lb,
            gamma_ub,
        })
    }

    /// Largest admissible stepsize `gamma lambda / (2 Gamma^2 Lambda^2)` (exclusive).
    pub fn step_threshold(&self) -> f64 {
        self.gamma_lb * self.lambda / (2.0 * self.gamma_ub.powi(2) * self.big_lambda.powi(2))
    }

    /// The looser closed-form upper bound `alpha^M (||H_0|| + 1/(lambda (2 sqrt(kappa) + kappa)))`
    /// with `||H_0|| = 1`.
    pub fn closed_form_upper(&self) -> f64 {
        closed_form_upper(self.lambda, self.big_lambda, self.memory, 1.0)
    }
}

fn check_constants(lambda: f64, big_lambda: f64) -> Result<(), AnalysisError> {
    if !(lambda > 0.0 && big_lambda >= lambda && big_lambda.is_finite()) {
        return Err(AnalysisError::BadConstants { lambda, big_lambda });
    }
    Ok(())
}

/// Spectral bounds for a metric built from `memory` blocks on top of the identity.
pub fn metric_bounds(lambda: f64, big_lambda: f64, memory: usize) -> Result<TheoryBounds, AnalysisError> {
    metric_bounds_with_base(lambda, big_lambda, memory, 1.0, 1.0)
}

/// As [`metric_bounds`] with a general base metric: `h_norm = ||H_{t-M}||`,
/// `b_norm = ||H_{t-M}^{-1}||`.
///
/// ```text
/// gamma_lb = 1 / (b_norm + M Lambda)
/// gamma_ub = alpha^M h_norm + (alpha^M - 1) / (lambda (alpha - 1)),  alpha = (1 + sqrt(kappa))^2
/// ```
pub fn metric_bounds_with_base(
    lambda: f64,
    big_lambda: f64,
    memory: usize,
    h_norm: f64,
    b_norm: f64,
) -> Result<TheoryBounds, AnalysisError> {
    check_constants(lambda, big_lambda)?;
    if !(h_norm > 0.0 && b_norm > 0.0 && h_norm.is_finite() && b_norm.is_finite()) {
        return Err(AnalysisError::BadConstants { lambda, big_lambda });
    }
    let kappa = big_lambda / lambda;
    let alpha = (1.0 + kappa.sqrt()).powi(2);
    let alpha_m = alpha.powi(memory as i32);
    Ok(TheoryBounds {
        lambda,
        big_lambda,
        kappa,
        memory,
        gamma_lb: 1.0 / (b_norm + memory as f64 * big_lambda),
        gamma_ub: alpha_m * h_norm + (alpha_m - 1.0) / (lambda * (alpha - 1.0)),
    })
}

/// `(1 + sqrt(kappa))^{2M} (h_norm + 1 / (lambda (2 sqrt(kappa) + kappa)))`.
pub fn closed_form_upper(lambda: f64, big_lambda: f64, memory: usize, h_norm: f64) -> f64 {
    let kappa = big_lambda / lambda;
    (1.0 + kappa.sqrt()).powi(2 * memory as i32) * (h_norm + 1.0 / (lambda * (2.0 * kappa.sqrt() + kappa)))
}

fn require_step(eta: f64, bounds: &TheoryBounds) -> Result<(), AnalysisError> {
    let threshold = bounds.step_threshold();
    if !(eta > 0.0 && eta < threshold) {
        return Err(AnalysisError::StepTooLarge { eta, threshold });
    }
    Ok(())
}

/// Smallest inner loop length for which the rate is guaranteed below one:
/// `1 / (2 eta (gamma lambda - eta Gamma^2 Lambda (2 Lambda - lambda)))`.
pub fn min_inner_loop(eta: f64, bounds: &TheoryBounds) -> Result<f64, AnalysisError> {
    require_step(eta, bounds)?;
    let b = bounds;
    let denom = b.gamma_lb * b.lambda - eta * b.gamma_ub.powi(2) * b.big_lambda * (2.0 * b.big_lambda - b.lambda);
    Ok(1.0 / (2.0 * eta * denom))
}

/// Expected contraction per outer iteration:
/// `(1/(2 m eta) + eta Gamma^2 Lambda (Lambda - lambda)) / (gamma lambda - eta Gamma^2 Lambda^2)`.
pub fn convergence_rate(eta: f64, m: usize, bounds: &TheoryBounds) -> Result<f64, AnalysisError> {
    let m_min = min_inner_loop(eta, bounds)?;
    if (m as f64) < m_min {
        return Err(AnalysisError::InnerLoopTooShort { m, m_min });
    }
    let b = bounds;
    let g2 = b.gamma_ub.powi(2);
    let num = 1.0 / (2.0 * m as f64 * eta) + eta * g2 * b.big_lambda * (b.big_lambda - b.lambda);
    let den = b.gamma_lb * b.lambda - eta * g2 * b.big_lambda.powi(2);
    Ok(num / den)
}

/// Outcome of [`verify_vr_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrBoundReport {
    /// Exact `E ||g||^2` over all subsets of the given size.
    pub lhs: f64,
    /// `4 Lambda (f(x) - f*) + 4 (Lambda - lambda) (f(w) - f*)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Largest number of subsets [`verify_vr_bound`] will enumerate.
pub const MAX_SUBSETS: u64 = 100_000;

/// Gradient-norm tolerance the reference optimum must meet.
pub const OPTIMUM_TOLERANCE: f64 = 1e-10;

fn binomial(n: usize, k: usize) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(
    n: usize,
    k: usize,
    mut f: impl FnMut(&[usize]) -> Result<(), AnalysisError>,
) -> Result<(), AnalysisError> {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx)?;
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return Ok(());
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Checks `E ||g||^2 <= 4 Lambda (f(x) - f*) + 4 (Lambda - lambda) (f(w) - f*)`
/// for `g = grad f_S(x) - grad f_S(w) + grad f(w)`, averaging exactly over all
/// subsets `S` of size `s_size`.
///
/// `w_star` must be a minimizer to gradient norm [`OPTIMUM_TOLERANCE`]; the
/// comparison allows a relative slack of `1e-12` for its residual.
pub fn verify_vr_bound<O: Objective + ?Sized>(
    model: &O,
    x: &[f64],
    w: &[f64],
    s_size: usize,
    w_star: &[f64],
) -> Result<VrBoundReport, AnalysisError> {
    let n = model.num_examples();
    if s_size == 0 || s_size > n {
        return Err(ObjectiveError::EmptySample.into());
    }
    let count = binomial(n, s_size)
        .filter(|&c| c <= MAX_SUBSETS)
        .ok_or(AnalysisError::TooManySubsets {
            n,
            s: s_size,
            limit: MAX_SUBSETS,
        })?;
    let residual = linalg::norm(&model.full_gradient(w_star)?);
    if residual.is_nan() || residual > OPTIMUM_TOLERANCE {
        return Err(AnalysisError::OptimumNotConverged {
            norm: residual,
            tolerance: OPTIMUM_TOLERANCE,
        });
    }
    let mu = model.full_gradient(w)?;
    let mut total = 0.0;
    for_each_subset(n, s_size, |subset| {
        let gx = model.subsampled_gradient(x, subset)?;
        let gw = model.subsampled_gradient(w, subset)?;
        total += gx
            .iter()
            .zip(&gw)
            .zip(&mu)
            .map(|((a, b), m)| (a - b + m).powi(2))
            .sum::<f64>();
        Ok(())
    })?;
    let lhs = total / count as f64;
    let (lambda, big_lambda) = model.smoothness_constants();
    let f_star = model.value(w_star)?;
    let rhs = 4.0 * big_lambda * (model.value(x)? - f_star) + 4.0 * (big_lambda - lambda) * (model.value(w)? - f_star);
    Ok(VrBoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
    })
}

/// Full-batch Newton iterations to gradient norm `tolerance`. Each step is
/// the block update with the full identity sketch, which yields the exact
/// inverse Hessian. Meant for small `d` (it forms the dense Hessian).
pub fn solve_optimum<O: Objective + ?Sized>(
    model: &O,
    start: &[f64],
    tolerance: f64,
) -> Result<Vec<f64>, AnalysisError> {
    let all: Vec<usize> = (0..model.num_examples()).collect();
    let mut w = start.to_vec();
    let mut f = model.value(&w)?;
    for _ in 0..200 {
        let g = model.full_gradient(&w)?;
        if linalg::norm(&g) <= tolerance {
            return Ok(w);
        }
        let h = dense_hessian(model, &w, &all)?;
        let chol = cholesky(&h.symmetrized().map_err(ObjectiveError::from)?).map_err(ObjectiveError::from)?;
        let mut step = g.clone();
        chol.solve_vec_in_place(&mut step);
        // damped Newton: halve until the objective does not increase; near the
        // optimum the decrease drops below rounding, so allow a few ulps of slack
        let slack = 8.0 * f64::EPSILON * f.abs().max(1.0);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a - t * b).collect();
            let ft = model.value(&trial)?;
            if ft <= f + slack || t < 1e-8 {
                w = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
    }
    let norm = linalg::norm(&model.full_gradient(&w)?);
    if norm <= tolerance {
        Ok(w)
    } else {
        Err(AnalysisError::OptimumNotConverged { norm, tolerance })
    }
}

/// The dense Hessian spectrum's extremes at `w` over sample `T`; oracle helper.
pub fn hessian_extremes<O: Objective + ?Sized>(
    model: &O,
    w: &[f64],
    sample: &[usize],
) -> Result<(f64, f64), AnalysisError> {
    let h: Matrix = dense_hessian(model, w, sample)?;
    let eig = linalg::sym_eigenvalues(&h.symmetrized().map_err(ObjectiveError::from)?).map_err(ObjectiveError::from)?;
    Ok((eig[0], eig[eig.len() - 1]))
}
