//! Stochastic block BFGS with SVRG gradients.
//!
//! Each outer iteration computes the full gradient `mu` at the reference
//! point `w_k`, then runs `m` inner steps
//!
//! ```text
//! g_t     = grad f_S(x_t) - grad f_S(w_k) + mu
//! x_{t+1} = x_t - eta * H_t g_t
//! ```
//!
//! where `H_t` is refreshed from a sketched Hessian action on an independent
//! subsample `T_t`. The metric persists across outer iterations. With
//! [`Strategy::Identity`] this is plain SVRG.
//!
//! Datapass accounting: a full gradient costs one pass; an inner step costs
//! `(|S| + |T|) / n`, where `|T|` is charged only on steps that formed a
//! Hessian action. The `q` directional products share the rows of `T_t` and
//! are charged once.

use std::time::{Duration, Instant};

use log::debug;
use thiserror::Error;

use crate::dataset::{sample_indices, IndexSample};
use crate::linalg::{self, Matrix};
use crate::metric::{dense_update, make_triple, two_loop_apply_in_place, BlockTriple, CurvatureBuffer, MetricError};
use crate::objective::{Objective, ObjectiveError};
use crate::rng::{RandomStream, StreamId};
use crate::sketch::{gaussian_sketch, self_conditioning_sketch, DirectionWindow, SketchError, SketchStrategy};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// How the metric is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// `H_t = I` throughout: the SVRG baseline.
    Identity,
    Sketched(SketchStrategy),
}

/// How `d_t = -H_t g_t` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOption {
    /// Keep an explicit `d x d` metric updated in full after every new block.
    Dense,
    /// Limited-memory two-loop recursion over the last `memory` blocks.
    TwoLoop,
}

/// How the next reference point is picked at the end of an inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterOption {
    LastIterate,
    /// A uniformly random inner iterate among `x_1, ..., x_m`.
    RandomIterate,
}

/// Largest dimension for which [`UpdateOption::Dense`] is accepted.
pub const DENSE_DIM_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub eta: f64,
    /// Inner loop length `m`.
    pub inner_len: usize,
    pub s_size: usize,
    pub t_size: usize,
    /// Number of block triples kept by the limited-memory metric.
    pub memory: usize,
    pub strategy: Strategy,
    pub update_option: UpdateOption,
    pub outer_option: OuterOption,
    /// Number of outer iterations `K`.
    pub max_outer: usize,
    /// Stop before an outer iteration once this many datapasses are spent.
    pub max_passes: Option<f64>,
    pub seed: u64,
    /// Starting point; zeros when absent.
    pub initial_point: Option<Vec<f64>>,
}

impl OptimizerConfig {
    /// Defaults for `n` examples: `|S| = |T| = ceil(sqrt(n))`, `m = floor(n / |S|)`,
    /// memory 5, two-loop update with a random reference iterate.
    pub fn new(n: usize, eta: f64, strategy: Strategy) -> Self {
        let s = ((n as f64).sqrt().ceil() as usize).clamp(1, n.max(1));
        OptimizerConfig {
            eta,
            inner_len: (n / s).max(1),
            s_size: s,
            t_size: s,
            memory: 5,
            strategy,
            update_option: UpdateOption::TwoLoop,
            outer_option: OuterOption::RandomIterate,
            max_outer: 10,
            max_passes: None,
            seed: 0,
            initial_point: None,
        }
    }

    /// Dense update with the last inner iterate as the next reference point.
    pub fn option_i(mut self) -> Self {
        self.update_option = UpdateOption::Dense;
        self.outer_option = OuterOption::LastIterate;
        self
    }

    /// Two-loop update with a random inner iterate; the setting the rate analysis covers.
    pub fn option_ii(mut self) -> Self {
        self.update_option = UpdateOption::TwoLoop;
        self.outer_option = OuterOption::RandomIterate;
        self
    }

    pub fn validate(&self, n: usize, dim: usize) -> Result<(), OptimizerError> {
        let bad = |msg: String| Err(OptimizerError::InvalidConfig(msg));
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("stepsize must be finite and non-negative, got {}", self.eta));
        }
        if self.inner_len == 0 {
            return bad("inner loop length must be at least 1".into());
        }
        if self.s_size == 0 || self.s_size > n {
            return bad(format!("|S| = {} outside [1, {n}]", self.s_size));
        }
        if self.t_size == 0 || self.t_size > n {
            return bad(format!("|T| = {} outside [1, {n}]", self.t_size));
        }
        if let Strategy::Sketched(sketch) = self.strategy {
            sketch.validate(dim)?;
        }
        if self.update_option == UpdateOption::Dense && dim > DENSE_DIM_LIMIT {
            return bad(format!("dense metric limited to d <= {DENSE_DIM_LIMIT}, got {dim}"));
        }
        if let Some(w0) = &self.initial_point {
            if w0.len() != dim {
                return bad(format!("initial point has length {}, expected {dim}", w0.len()));
            }
            if w0.iter().any(|v| !v.is_finite()) {
                return bad("initial point must be finite".into());
            }
        }
        Ok(())
    }
}

/// `grad f_S(x) - grad f_S(x0) + mu`.
pub fn vr_gradient<O: Objective + ?Sized>(
    model: &O,
    x: &[f64],
    x0: &[f64],
    mu: &[f64],
    sample: &[usize],
) -> Result<Vec<f64>, ObjectiveError> {
    let mut out = vec![0.0; model.dim()];
    let mut scratch = vec![0.0; model.dim()];
    vr_gradient_into(model, x, x0, mu, sample, &mut out, &mut scratch)?;
    Ok(out)
}

fn vr_gradient_into<O: Objective + ?Sized>(
    model: &O,
    x: &[f64],
    x0: &[f64],
    mu: &[f64],
    sample: &[usize],
    out: &mut [f64],
    scratch: &mut [f64],
) -> Result<(), ObjectiveError> {
    if mu.len() != model.dim() {
        return Err(ObjectiveError::DimensionMismatch {
            expected: model.dim(),
            found: mu.len(),
        });
    }
    model.subsampled_gradient_into(x, sample, out)?;
    model.subsampled_gradient_into(x0, sample, scratch)?;
    for ((o, s), m) in out.iter_mut().zip(scratch.iter()).zip(mu) {
        *o = *o - s + m;
    }
    Ok(())
}

/// The four independent child streams of one run.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub gradient_sample: RandomStream,
    pub hessian_sample: RandomStream,
    pub sketch: RandomStream,
    pub iterate_pick: RandomStream,
}

impl RunStreams {
    pub fn from_seed(seed: u64) -> Self {
        let root = RandomStream::new(seed);
        RunStreams {
            gradient_sample: root.child(StreamId::GradientSample),
            hessian_sample: root.child(StreamId::HessianSample),
            sketch: root.child(StreamId::Sketch),
            iterate_pick: root.child(StreamId::IteratePick),
        }
    }
}

/// What a single inner step did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    pub hessian_formed: bool,
    pub metric_updated: bool,
    pub update_skipped: bool,
}

/// Mutable state of one optimizer run.
#[derive(Debug, Clone)]
pub struct IterateState {
    /// Reference point `w_k`, also the inner loop's `x_0`.
    pub w: Vec<f64>,
    /// `grad f(w_k)`.
    pub mu: Vec<f64>,
    /// Current inner iterate `x_t`.
    pub x: Vec<f64>,
    pub t: usize,
    pub k: usize,
    buffer: CurvatureBuffer,
    dense_metric: Option<Matrix>,
    window: Option<DirectionWindow>,
    streams: RunStreams,
    grad: Vec<f64>,
    scratch: Vec<f64>,
    skipped_updates: usize,
}

impl IterateState {
    pub fn new<O: Objective + ?Sized>(model: &O, config: &OptimizerConfig) -> Result<Self, OptimizerError> {
        let (n, dim) = (model.num_examples(), model.dim());
        config.validate(n, dim)?;
        let w = config.initial_point.clone().unwrap_or_else(|| vec![0.0; dim]);
        let factored = matches!(config.strategy, Strategy::Sketched(s) if s.needs_factored_buffer());
        let buffer = if factored {
            CurvatureBuffer::new_factored(dim, config.memory)
        } else {
            CurvatureBuffer::new(dim, config.memory)
        };
        let dense_metric = match (config.update_option, config.strategy) {
            (UpdateOption::Dense, Strategy::Sketched(_)) => Some(Matrix::identity(dim)),
            _ => None,
        };
        let window = match config.strategy {
            Strategy::Sketched(SketchStrategy::PrevDirections { l }) => Some(DirectionWindow::new(dim, l)?),
            _ => None,
        };
        let mu = model.full_gradient(&w)?;
        Ok(IterateState {
            x: w.clone(),
            w,
            mu,
            t: 0,
            k: 0,
            buffer,
            dense_metric,
            window,
            streams: RunStreams::from_seed(config.seed),
            grad: vec![0.0; dim],
            scratch: vec![0.0; dim],
            skipped_updates: 0,
        })
    }

    pub fn buffer(&self) -> &CurvatureBuffer {
        &self.buffer
    }

    pub fn dense_metric(&self) -> Option<&Matrix> {
        self.dense_metric.as_ref()
    }

    pub fn skipped_updates(&self) -> usize {
        self.skipped_updates
    }

    /// Starts an outer iteration at `w`: recomputes `mu` and resets `x`.
    pub fn begin_outer<O: Objective + ?Sized>(&mut self, model: &O) -> Result<(), OptimizerError> {
        self.mu = model.full_gradient(&self.w)?;
        self.x.copy_from_slice(&self.w);
        self.t = 0;
        Ok(())
    }

    /// `H_t v` in place under the configured update option.
    fn apply_metric(&self, v: &mut [f64]) -> Result<(), OptimizerError> {
        match &self.dense_metric {
            Some(h) => {
                let hv = h.mul_vec(v).map_err(MetricError::from)?;
                v.copy_from_slice(&hv);
            }
            None => two_loop_apply_in_place(&self.buffer, v)?,
        }
        Ok(())
    }

    fn accept_triple(&mut self, triple: BlockTriple) -> Result<(), OptimizerError> {
        if let Some(h) = &self.dense_metric {
            self.dense_metric = Some(dense_update(h, &triple)?);
        }
        self.buffer.push(triple)?;
        Ok(())
    }

    fn note_skip(&mut self, reason: &MetricError) {
        self.skipped_updates += 1;
        debug!("outer {} inner {}: metric update skipped ({reason})", self.k, self.t);
    }

    /// Gaussian and self-conditioning sketches: refresh the metric before the step.
    fn refresh_before_step<O: Objective + ?Sized>(
        &mut self,
        model: &O,
        sketch: SketchStrategy,
        hess_sample: &IndexSample,
    ) -> Result<bool, OptimizerError> {
        let dim = model.dim();
        let attempts = match sketch {
            SketchStrategy::Gaussian { .. } => 4,
            SketchStrategy::SelfConditioning { .. } => 2,
            SketchStrategy::PrevDirections { .. } => unreachable!("refreshed after the step"),
        };
        let mut last_err = None;
        for _ in 0..attempts {
            let (d, cols) = match sketch {
                SketchStrategy::Gaussian { q } => (gaussian_sketch(&mut self.streams.sketch, dim, q)?, None),
                SketchStrategy::SelfConditioning { q } => {
                    let (cols, d) = self_conditioning_sketch(&mut self.streams.sketch, &self.buffer, dim, q)?;
                    (d, Some(cols))
                }
                SketchStrategy::PrevDirections { .. } => unreachable!(),
            };
            let y = model.hessian_action(&self.x, hess_sample, &d)?;
            match make_triple(d, y, cols) {
                Ok(triple) => {
                    self.accept_triple(triple)?;
                    return Ok(true);
                }
                Err(e @ MetricError::RankDeficient(_)) => last_err = Some(e),
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(e) = last_err {
            self.note_skip(&e);
        }
        Ok(false)
    }

    /// Previous-directions sketch: on emission, form the block from the window,
    /// dropping the oldest columns until `D^T Y` factorizes.
    fn refresh_from_window<O: Objective + ?Sized>(
        &mut self,
        model: &O,
        d: Matrix,
        hess_sample: &IndexSample,
    ) -> Result<bool, OptimizerError> {
        let y = model.hessian_action(&self.x, hess_sample, &d)?;
        let cols = d.cols();
        let mut last_err = None;
        for drop in 0..cols {
            let keep = cols - drop;
            let dk = Matrix::from_col_major(d.rows(), keep, d.as_slice()[drop * d.rows()..].to_vec())
                .map_err(MetricError::from)?;
            let yk = Matrix::from_col_major(y.rows(), keep, y.as_slice()[drop * y.rows()..].to_vec())
                .map_err(MetricError::from)?;
            match make_triple(dk, yk, None) {
                Ok(triple) => {
                    self.accept_triple(triple)?;
                    return Ok(true);
                }
                Err(e @ MetricError::RankDeficient(_)) => last_err = Some(e),
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(e) = last_err {
            self.note_skip(&e);
        }
        Ok(false)
    }
}

/// One inner iteration: sample `S_t`, `T_t`, form `g_t`, refresh the metric
/// and step `x_{t+1} = x_t + eta d_t`.
pub fn inner_step<O: Objective + ?Sized>(
    model: &O,
    state: &mut IterateState,
    config: &OptimizerConfig,
) -> Result<StepReport, OptimizerError> {
    let n = model.num_examples();
    let grad_sample = sample_indices(&mut state.streams.gradient_sample, n, config.s_size)
        .map_err(|e| OptimizerError::InvalidConfig(e.to_string()))?;
    let mut report = StepReport::default();

    vr_gradient_into(
        model,
        &state.x,
        &state.w,
        &state.mu,
        &grad_sample,
        &mut state.grad,
        &mut state.scratch,
    )?;

    let sketch = match config.strategy {
        Strategy::Identity => None,
        Strategy::Sketched(s) => Some(s),
    };
    let hess_sample = match sketch {
        Some(_) => Some(
            sample_indices(&mut state.streams.hessian_sample, n, config.t_size)
                .map_err(|e| OptimizerError::InvalidConfig(e.to_string()))?,
        ),
        None => None,
    };

    if let (Some(s @ (SketchStrategy::Gaussian { .. } | SketchStrategy::SelfConditioning { .. })), Some(t)) =
        (sketch, hess_sample.as_ref())
    {
        report.hessian_formed = true;
        report.metric_updated = state.refresh_before_step(model, s, t)?;
        report.update_skipped = !report.metric_updated;
    }

    // direction d_t = -H_t g_t, kept in `scratch`
    let mut direction = std::mem::take(&mut state.scratch);
    direction.copy_from_slice(&state.grad);
    if sketch.is_some() {
        state.apply_metric(&mut direction)?;
    }
    for v in direction.iter_mut() {
        *v = -*v;
    }

    if let (Some(window), Some(t)) = (state.window.as_mut(), hess_sample.as_ref()) {
        match window.push(&direction) {
            Ok(Some(d)) => {
                report.hessian_formed = true;
                report.metric_updated = state.refresh_from_window(model, d, t)?;
                report.update_skipped = !report.metric_updated;
            }
            Ok(None) | Err(SketchError::ZeroDirection) => {}
            Err(e) => return Err(e.into()),
        }
    }

    linalg::axpy(config.eta, &direction, &mut state.x);
    state.scratch = direction;
    state.t += 1;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub datapasses: f64,
    pub elapsed_seconds: f64,
    pub fvalue: f64,
}

/// Objective value after each outer iteration, plus the starting point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn min_fvalue(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.fvalue)
            .filter(|v| v.is_finite())
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// A non-finite iterate or objective value appeared; the trace stops at the
    /// last finite outer iterate.
    Diverged {
        outer: usize,
        inner: usize,
    },
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: RunTrace,
    /// Last finite reference point.
    pub w: Vec<f64>,
    pub status: RunStatus,
    /// Metric refreshes abandoned after rank repair.
    pub skipped_updates: usize,
    /// Datapasses spent, including any partial outer iteration cut short by divergence.
    pub datapasses: f64,
    pub elapsed_seconds: f64,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }
}

/// Runs the full method for `config.max_outer` outer iterations (or until the
/// datapass budget is spent).
pub fn run<O: Objective + ?Sized>(model: &O, config: &OptimizerConfig) -> Result<RunResult, OptimizerError> {
    let n = model.num_examples() as f64;
    let mut state = IterateState::new(model, config)?;
    let mut trace = RunTrace::default();
    let mut passes = 0.0;
    let mut busy = Duration::ZERO;
    trace.records.push(TraceRecord {
        datapasses: 0.0,
        elapsed_seconds: 0.0,
        fvalue: model.value(&state.w)?,
    });
    let mut chosen = vec![0.0; model.dim()];
    let mut status = RunStatus::Completed;

    'outer: for k in 0..config.max_outer {
        if config.max_passes.is_some_and(|budget| passes >= budget) {
            break;
        }
        let start = Instant::now();
        state.k = k;
        if k > 0 {
            state.begin_outer(model)?;
        }
        passes += 1.0;
        let pick = match config.outer_option {
            OuterOption::LastIterate => config.inner_len,
            OuterOption::RandomIterate => 1 + state.streams.iterate_pick.uniform_index(0, config.inner_len),
        };
        for t in 0..config.inner_len {
            let report = inner_step(model, &mut state, config)?;
            let touched = config.s_size + if report.hessian_formed { config.t_size } else { 0 };
            passes += touched as f64 / n;
            if state.x.iter().any(|v| !v.is_finite()) {
                status = RunStatus::Diverged { outer: k, inner: t };
                busy += start.elapsed();
                break 'outer;
            }
            if t + 1 == pick {
                chosen.copy_from_slice(&state.x);
            }
        }
        busy += start.elapsed();
        let fvalue = model.value(&chosen)?;
        if !fvalue.is_finite() {
            status = RunStatus::Diverged {
                outer: k,
                inner: config.inner_len,
            };
            break;
        }
        state.w.copy_from_slice(&chosen);
        trace.records.push(TraceRecord {
            datapasses: passes,
            elapsed_seconds: busy.as_secs_f64(),
            fvalue,
        });
    }
    Ok(RunResult {
        trace,
        w: state.w,
        status,
        skipped_updates: state.skipped_updates,
        datapasses: passes,
        elapsed_seconds: busy.as_secs_f64(),
    })
}

/// SVRG: [`run`] with the identity metric.
pub fn svrg_baseline<O: Objective + ?Sized>(model: &O, config: &OptimizerConfig) -> Result<RunResult, OptimizerError> {
    let config = OptimizerConfig {
        strategy: Strategy::Identity,
        ..config.clone()
    };
    run(model, &config)
}
