use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use blockbfgs::dataset::{parse_libsvm, Dataset};
use blockbfgs::optimizer::{self, DENSE_DIM_LIMIT};
use blockbfgs::{LogisticModel, Objective, OptimizerConfig, OuterOption, RunResult, UpdateOption};

use crate::method::{MethodDefaults, MethodName, MethodSpec};
use crate::output::{self, ResultRow};
use crate::CliError;

/// The two bundled settings of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionPreset {
    /// Last inner iterate as the next reference point; dense metric update
    /// while `d <= DENSE_DIM_LIMIT`, the two-loop recursion above that.
    I,
    /// Two-loop recursion and a uniformly random inner iterate.
    II,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub data_path: PathBuf,
    /// Force the feature dimension (before the bias column); inferred when absent.
    pub dim: Option<usize>,
    pub methods: Vec<MethodName>,
    pub method_defaults: MethodDefaults,
    pub grid: Vec<f64>,
    pub passes: usize,
    pub seeds: Vec<u64>,
    pub s_size: Option<usize>,
    pub t_size: Option<usize>,
    pub bias: bool,
    /// Regularization; `1/n` when absent.
    pub reg: Option<f64>,
    pub option: OptionPreset,
    pub out_dir: PathBuf,
    pub emit_plot_script: bool,
}

impl ExperimentSpec {
    pub fn new(data_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            data_path: data_path.into(),
            dim: None,
            methods: vec![MethodName::svrg()],
            method_defaults: MethodDefaults::default(),
            grid: default_grid(),
            passes: 30,
            seeds: vec![1],
            s_size: None,
            t_size: None,
            bias: true,
            reg: None,
            option: OptionPreset::I,
            out_dir: out_dir.into(),
            emit_plot_script: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.methods.is_empty() {
            return bad("no methods given");
        }
        if self.grid.is_empty() {
            return bad("stepsize grid is empty");
        }
        if self.grid.iter().any(|&eta| !(eta > 0.0 && eta.is_finite())) {
            return bad("stepsizes must be positive and finite");
        }
        if self.seeds.is_empty() {
            return bad("no seeds given");
        }
        if self.passes == 0 {
            return bad("passes budget must be at least 1");
        }
        if self.s_size == Some(0) || self.t_size == Some(0) {
            return bad("subsample sizes must be at least 1");
        }
        if let Some(reg) = self.reg {
            if !(reg > 0.0 && reg.is_finite()) {
                return bad("regularization must be positive and finite");
            }
        }
        Ok(())
    }

    /// Method list with bare names resolved for a problem of dimension `dim`.
    pub fn resolved_methods(&self, dim: usize) -> Vec<MethodSpec> {
        let mut out: Vec<MethodSpec> = Vec::new();
        for name in &self.methods {
            let m = name.resolve(dim, &self.method_defaults);
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    pub fn optimizer_config(&self, method: &MethodSpec, eta: f64, seed: u64, n: usize, dim: usize) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::new(n, eta, method.strategy());
        if let Some(s) = self.s_size {
            cfg.s_size = s;
            cfg.inner_len = (n / s).max(1);
        }
        if let Some(t) = self.t_size {
            cfg.t_size = t;
        }
        cfg.memory = method.memory();
        cfg = match self.option {
            OptionPreset::I => {
                let mut c = cfg.option_i();
                if dim > DENSE_DIM_LIMIT {
                    c.update_option = UpdateOption::TwoLoop;
                }
                c
            }
            OptionPreset::II => cfg.option_ii(),
        };
        debug_assert!(self.option != OptionPreset::I || cfg.outer_option == OuterOption::LastIterate);
        // every outer iteration costs at least one pass
        cfg.max_outer = self.passes + 1;
        cfg.max_passes = Some(self.passes as f64);
        cfg.seed = seed;
        cfg
    }
}

/// `1, 0.5, 0.1, 0.05, ..., 1e-7, 5e-8, 1e-8`.
pub fn default_grid() -> Vec<f64> {
    let mut grid = vec![1.0];
    for k in 1..=8 {
        grid.push(5.0 * 10f64.powi(-k));
        grid.push(10f64.powi(-k));
    }
    grid
}

/// One finished run, its trace cut to the passes budget.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub method: MethodSpec,
    pub eta: f64,
    pub seed: u64,
    pub result: RunResult,
}

/// Runs every (method, eta, seed) combination in parallel. The output order
/// is method-major, then grid order, then seed order, independent of scheduling.
pub fn sweep<O: Objective + ?Sized>(model: &O, spec: &ExperimentSpec) -> Result<Vec<RunOutcome>, CliError> {
    spec.validate()?;
    let (n, dim) = (model.num_examples(), model.dim());
    let mut jobs = Vec::new();
    for method in spec.resolved_methods(dim) {
        for &eta in &spec.grid {
            for &seed in &spec.seeds {
                jobs.push((method, eta, seed));
            }
        }
    }
    for (method, _, _) in jobs.iter().take(1) {
        spec.optimizer_config(method, 1.0, 0, n, dim).validate(n, dim)?;
    }
    let budget = spec.passes as f64;
    jobs.into_par_iter()
        .map(|(method, eta, seed)| {
            let cfg = spec.optimizer_config(&method, eta, seed, n, dim);
            let mut result = optimizer::run(model, &cfg)?;
            result.trace.records.retain(|r| r.datapasses <= budget + 1e-9);
            if result.diverged() {
                warn!(
                    "{method} eta={eta:e} seed={seed}: non-finite iterate after {:.2} passes",
                    result.datapasses
                );
            }
            Ok(RunOutcome {
                method,
                eta,
                seed,
                result,
            })
        })
        .collect()
}

fn min_fvalue(outcomes: &[RunOutcome]) -> Result<f64, CliError> {
    if outcomes.iter().all(|o| o.result.diverged()) {
        return Err(CliError::AllRunsDiverged);
    }
    // finite values recorded before a divergent run aborted still count, so
    // every recorded error stays non-negative
    outcomes
        .iter()
        .flat_map(|o| o.result.trace.records.iter().map(|r| r.fvalue))
        .filter(|f| f.is_finite())
        .min_by(f64::total_cmp)
        .ok_or(CliError::AllRunsDiverged)
}

/// Smallest objective value recorded by any run within the passes budget.
/// Fails with [`CliError::AllRunsDiverged`] when no run finished.
pub fn estimate_optimum<O: Objective + ?Sized>(model: &O, spec: &ExperimentSpec) -> Result<f64, CliError> {
    min_fvalue(&sweep(model, spec)?)
}

/// Winning stepsize for one method: smallest final error averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct BestEta {
    pub method: String,
    pub eta: f64,
    pub mean_final_error: f64,
    pub seeds_used: usize,
    pub diverged_runs: usize,
}

/// Picks the best stepsize for each method from result rows alone.
///
/// A run is the set of rows sharing `(method, eta, seed)`; its final error is
/// the error of its last row. Runs ending in a non-finite marker row count as
/// divergent and are left out. Ties go to the stepsize seen first.
pub fn select_best(rows: &[ResultRow]) -> Vec<BestEta> {
    // eta (in first-seen order) -> seed -> last row
    type EtaRuns<'r> = Vec<(f64, BTreeMap<u64, &'r ResultRow>)>;
    let mut order: Vec<String> = Vec::new();
    let mut runs: BTreeMap<&str, EtaRuns> = BTreeMap::new();
    for row in rows {
        if !order.contains(&row.method) {
            order.push(row.method.clone());
        }
        let etas = runs.entry(row.method.as_str()).or_default();
        let pos = match etas.iter().position(|(eta, _)| eta.to_bits() == row.eta.to_bits()) {
            Some(p) => p,
            None => {
                etas.push((row.eta, BTreeMap::new()));
                etas.len() - 1
            }
        };
        etas[pos].1.insert(row.seed, row);
    }
    let mut best = Vec::new();
    for method in order {
        let mut diverged = 0;
        let mut winner: Option<BestEta> = None;
        for (eta, seeds) in &runs[method.as_str()] {
            let finals: Vec<f64> = seeds.values().map(|r| r.error).collect();
            let ok: Vec<f64> = finals.iter().copied().filter(|e| e.is_finite()).collect();
            diverged += finals.len() - ok.len();
            if ok.is_empty() {
                continue;
            }
            let mean = ok.iter().sum::<f64>() / ok.len() as f64;
            if winner.as_ref().is_none_or(|w| mean < w.mean_final_error) {
                winner = Some(BestEta {
                    method: method.clone(),
                    eta: *eta,
                    mean_final_error: mean,
                    seeds_used: ok.len(),
                    diverged_runs: 0,
                });
            }
        }
        if let Some(mut w) = winner {
            w.diverged_runs = diverged;
            best.push(w);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub f_star: f64,
    pub n: usize,
    pub dim: usize,
    /// Rows per method label, in the order the methods were given.
    pub rows: Vec<(String, Vec<ResultRow>)>,
    pub best: Vec<BestEta>,
    pub files: Vec<PathBuf>,
}

pub fn load_dataset(path: &Path, dim: Option<usize>, bias: bool) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|source| CliError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    let data = parse_libsvm(BufReader::new(file), dim).map_err(|source| CliError::ParseFailure {
        path: path.to_path_buf(),
        source,
    })?;
    if bias {
        data.add_bias().map_err(|source| CliError::ParseFailure {
            path: path.to_path_buf(),
            source,
        })
    } else {
        Ok(data)
    }
}

pub fn rows_for(outcome: &RunOutcome, f_star: f64) -> Vec<ResultRow> {
    let label = outcome.method.label();
    let row = |datapasses: f64, seconds: f64, fvalue: f64| ResultRow {
        method: label.clone(),
        eta: outcome.eta,
        seed: outcome.seed,
        datapasses,
        elapsed_seconds: seconds,
        fvalue,
        error: fvalue - f_star,
    };
    let mut rows: Vec<ResultRow> = outcome
        .result
        .trace
        .records
        .iter()
        .map(|r| row(r.datapasses, r.elapsed_seconds, r.fvalue))
        .collect();
    if outcome.result.diverged() {
        rows.push(row(outcome.result.datapasses, outcome.result.elapsed_seconds, f64::NAN));
    }
    rows
}

/// Loads the data, sweeps all runs, and writes the CSV traces, `summary.csv`
/// and (if requested) `plot_errors.py` into `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, CliError> {
    spec.validate()?;
    let data = load_dataset(&spec.data_path, spec.dim, spec.bias)?;
    let reg = spec.reg.unwrap_or(1.0 / data.n() as f64);
    let model = LogisticModel::new(&data, reg)?;
    info!(
        "{}: n = {}, d = {} (bias {}), reg = {reg:e}",
        spec.data_path.display(),
        data.n(),
        data.dim(),
        if spec.bias { "on" } else { "off" }
    );
    let outcomes = sweep(&model, spec)?;
    let f_star = min_fvalue(&outcomes)?;
    info!("estimated optimum f* = {f_star:.16e}");

    let mut rows: Vec<(String, Vec<ResultRow>)> = Vec::new();
    for outcome in &outcomes {
        let label = outcome.method.label();
        let new_rows = rows_for(outcome, f_star);
        match rows.iter_mut().find(|(l, _)| *l == label) {
            Some((_, existing)) => existing.extend(new_rows),
            None => rows.push((label, new_rows)),
        }
    }
    let all: Vec<ResultRow> = rows.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let best = select_best(&all);

    fs::create_dir_all(&spec.out_dir).map_err(|source| CliError::IoFailure {
        path: spec.out_dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    for (label, method_rows) in &rows {
        let path = spec.out_dir.join(format!("{label}.csv"));
        output::write_result_csv(&path, method_rows)?;
        files.push(path);
    }
    let summary = spec.out_dir.join("summary.csv");
    output::write_summary_csv(&summary, &best)?;
    files.push(summary);
    if spec.emit_plot_script {
        let path = spec.out_dir.join("plot_errors.py");
        let labels: Vec<&str> = rows.iter().map(|(l, _)| l.as_str()).collect();
        fs::write(&path, output::plot_script(&labels)).map_err(|source| CliError::IoFailure {
            path: path.clone(),
            source,
        })?;
        files.push(path);
    }
    for b in &best {
        info!(
            "{}: best eta {:e}, mean final error {:.3e} ({} diverged runs excluded)",
            b.method, b.eta, b.mean_final_error, b.diverged_runs
        );
    }
    Ok(ExperimentReport {
        f_star,
        n: data.n(),
        dim: data.dim(),
        rows,
        best,
        files,
    })
}
