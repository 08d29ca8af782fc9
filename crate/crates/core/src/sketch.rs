//! Sketching matrices `D_t`: Gaussian, delayed previous search directions,
//! and self-conditioning columns of the current factor.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::dataset::sample_indices;
use crate::linalg::Matrix;
use crate::metric::{factored_apply, CurvatureBuffer, MetricError};
use crate::rng::RandomStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("bad sketch shape: {cols} columns for dimension {dim}")]
    BadShape { dim: usize, cols: usize },
    #[error("search direction is identically zero")]
    ZeroDirection,
    #[error("direction has length {found}, window expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("self-conditioning needs a factored curvature buffer")]
    BufferNotFactored,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchStrategy {
    /// `q` i.i.d. standard normal columns per step.
    Gaussian { q: usize },
    /// The last `l` search directions, refreshed once every `l` steps.
    PrevDirections { l: usize },
    /// `q` random columns of the current factor `L_{t-1}`.
    SelfConditioning { q: usize },
}

impl SketchStrategy {
    /// Number of sketch columns (`q`, or `L` for previous directions).
    pub fn width(&self) -> usize {
        match *self {
            SketchStrategy::Gaussian { q } | SketchStrategy::SelfConditioning { q } => q,
            SketchStrategy::PrevDirections { l } => l,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), SketchError> {
        let cols = self.width();
        if cols == 0 || cols > dim {
            return Err(SketchError::BadShape { dim, cols });
        }
        Ok(())
    }

    pub fn needs_factored_buffer(&self) -> bool {
        matches!(self, SketchStrategy::SelfConditioning { .. })
    }
}

impl fmt::Display for SketchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SketchStrategy::Gaussian { q } => write!(f, "gauss(q={q})"),
            SketchStrategy::PrevDirections { l } => write!(f, "prev(L={l})"),
            SketchStrategy::SelfConditioning { q } => write!(f, "fact(q={q})"),
        }
    }
}

/// Default Gaussian / self-conditioning width: `ceil(sqrt(d))`, at most 32.
pub fn default_q(dim: usize) -> usize {
    ((dim as f64).sqrt().ceil() as usize).clamp(1, 32).min(dim.max(1))
}

/// Default number of stored directions: `ceil(d^(1/4))`.
pub fn default_l(dim: usize) -> usize {
    ((dim as f64).powf(0.25).ceil() as usize).clamp(1, dim.max(1))
}

pub fn gaussian_sketch(stream: &mut RandomStream, dim: usize, q: usize) -> Result<Matrix, SketchError> {
    if q == 0 || q > dim {
        return Err(SketchError::BadShape { dim, cols: q });
    }
    let data = (0..dim * q).map(|_| stream.standard_normal()).collect();
    Ok(Matrix::from_col_major(dim, q, data).expect("finite normals"))
}

/// Sliding window of the most recent search directions.
#[derive(Debug, Clone)]
pub struct DirectionWindow {
    capacity: usize,
    dim: usize,
    directions: VecDeque<Vec<f64>>,
    since_emission: usize,
}

impl DirectionWindow {
    pub fn new(dim: usize, capacity: usize) -> Result<Self, SketchError> {
        if capacity == 0 || capacity > dim {
            return Err(SketchError::BadShape { dim, cols: capacity });
        }
        Ok(DirectionWindow {
            capacity,
            dim,
            directions: VecDeque::with_capacity(capacity),
            since_emission: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Stores `direction`; once `capacity` directions have arrived since the
    /// last emission, returns them oldest first as a `d x L` matrix.
    /// All-zero directions are rejected and not counted.
    pub fn push(&mut self, direction: &[f64]) -> Result<Option<Matrix>, SketchError> {
        if direction.len() != self.dim {
            return Err(SketchError::DimensionMismatch {
                expected: self.dim,
                found: direction.len(),
            });
        }
        if direction.iter().all(|&v| v == 0.0) {
            return Err(SketchError::ZeroDirection);
        }
        if self.directions.len() == self.capacity {
            self.directions.pop_front();
        }
        self.directions.push_back(direction.to_vec());
        self.since_emission += 1;
        if self.since_emission < self.capacity {
            return Ok(None);
        }
        self.since_emission = 0;
        let cols: Vec<&[f64]> = self.directions.iter().map(Vec::as_slice).collect();
        Ok(Some(
            Matrix::from_columns(&cols).map_err(|_| SketchError::ZeroDirection)?,
        ))
    }
}

/// `d x q` matrix of identity columns `I_{:C}`.
pub fn identity_columns(dim: usize, columns: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(dim, columns.len());
    for (j, &c) in columns.iter().enumerate() {
        m.set(c, j, 1.0);
    }
    m
}

/// Samples `C` uniformly from the `d` coordinates and returns `(C, L_{t-1} I_{:C})`.
pub fn self_conditioning_sketch(
    stream: &mut RandomStream,
    buffer: &CurvatureBuffer,
    dim: usize,
    q: usize,
) -> Result<(Vec<usize>, Matrix), SketchError> {
    if q == 0 || q > dim || buffer.dim() != dim {
        return Err(SketchError::BadShape { dim, cols: q });
    }
    if !buffer.is_factored() {
        return Err(SketchError::BufferNotFactored);
    }
    let columns = sample_indices(stream, dim, q).expect("q <= dim").to_vec();
    let sketch = factored_apply(buffer, &identity_columns(dim, &columns))?;
    Ok((columns, sketch))
}
