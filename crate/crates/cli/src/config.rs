//! Command-line flags and the optional TOML config file. Precedence is
//! flags, then the file, then built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use crate::experiment::{default_grid, ExperimentSpec, OptionPreset};
use crate::method::{MethodDefaults, MethodName};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionArg {
    I,
    Ii,
}

impl From<OptionArg> for OptionPreset {
    fn from(o: OptionArg) -> Self {
        match o {
            OptionArg::I => OptionPreset::I,
            OptionArg::Ii => OptionPreset::II,
        }
    }
}

/// Sweep stochastic block BFGS and SVRG over a stepsize grid on a LIBSVM dataset.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "blockbfgs", version)]
pub struct Args {
    /// LIBSVM data file.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Feature dimension before the bias column; inferred from the data when absent.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Methods: svrg, gauss_Q_M, prev_L_M, fact_Q_M, or bare gauss/prev/fact.
    #[arg(long, value_delimiter = ',', value_name = "NAME[,NAME...]")]
    pub method: Option<Vec<String>>,
    /// Sketch width for bare gauss/fact names [default: ceil(sqrt(d)), at most 32].
    #[arg(long)]
    pub q: Option<usize>,
    /// Stored directions for bare prev names [default: ceil(d^(1/4))].
    #[arg(long = "L", value_name = "L")]
    pub l: Option<usize>,
    /// Curvature blocks kept, for bare names [default: 5].
    #[arg(long)]
    pub memory: Option<usize>,
    /// Stepsizes to try instead of the grid.
    #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
    pub eta: Option<Vec<f64>>,
    /// Use the 17-point grid 1, 0.5, 0.1, ..., 5e-8, 1e-8 (the default).
    #[arg(long)]
    pub grid: bool,
    /// Datapass budget per run [default: 30].
    #[arg(long)]
    pub passes: Option<usize>,
    /// Gradient subsample size [default: ceil(sqrt(n))].
    #[arg(long)]
    pub s_size: Option<usize>,
    /// Hessian subsample size [default: ceil(sqrt(n))].
    #[arg(long)]
    pub t_size: Option<usize>,
    /// Seeds; every run is repeated once per seed [default: 1].
    #[arg(long, value_delimiter = ',', value_name = "INT[,INT...]")]
    pub seed: Option<Vec<u64>>,
    /// Do not append the constant bias feature.
    #[arg(long)]
    pub no_bias: bool,
    /// L2 regularization [default: 1/n].
    #[arg(long)]
    pub reg: Option<f64>,
    /// i: last inner iterate, dense update; ii: random inner iterate, two-loop update [default: i].
    #[arg(long, value_enum)]
    pub option: Option<OptionArg>,
    /// Output directory [default: results].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write plot_errors.py (matplotlib) next to the CSVs.
    #[arg(long)]
    pub emit_plot_script: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub dim: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub q: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub memory: Option<usize>,
    pub eta: Option<Vec<f64>>,
    pub passes: Option<usize>,
    pub s_size: Option<usize>,
    pub t_size: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub bias: Option<bool>,
    pub reg: Option<f64>,
    pub option: Option<OptionArg>,
    pub out: Option<PathBuf>,
    pub emit_plot_script: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl Args {
    /// Builds the experiment from these flags layered over `file`.
    pub fn into_spec(self, file: FileConfig) -> Result<ExperimentSpec, CliError> {
        let data = self
            .data
            .or(file.data)
            .ok_or_else(|| CliError::Config("no data file given (--data or `data` in the config file)".into()))?;
        let out = self.out.or(file.out).unwrap_or_else(|| PathBuf::from("results"));
        let mut spec = ExperimentSpec::new(data, out);
        let names = self.method.or(file.methods).unwrap_or_else(|| vec!["svrg".into()]);
        spec.methods = names
            .iter()
            .map(|n| n.parse())
            .collect::<Result<Vec<MethodName>, _>>()?;
        spec.method_defaults = MethodDefaults {
            q: self.q.or(file.q),
            l: self.l.or(file.l),
            memory: self.memory.or(file.memory),
        };
        spec.grid = if self.grid {
            default_grid()
        } else {
            self.eta.or(file.eta).unwrap_or_else(default_grid)
        };
        spec.dim = self.dim.or(file.dim);
        spec.passes = self.passes.or(file.passes).unwrap_or(spec.passes);
        spec.s_size = self.s_size.or(file.s_size);
        spec.t_size = self.t_size.or(file.t_size);
        spec.seeds = self.seed.or(file.seeds).unwrap_or(spec.seeds);
        spec.bias = if self.no_bias { false } else { file.bias.unwrap_or(true) };
        spec.reg = self.reg.or(file.reg);
        spec.option = self
            .option
            .or(file.option)
            .map(OptionPreset::from)
            .unwrap_or(spec.option);
        spec.emit_plot_script = self.emit_plot_script || file.emit_plot_script.unwrap_or(false);
        spec.validate()?;
        Ok(spec)
    }

    /// Reads the config file named by `--config`, if any, and merges.
    pub fn resolve(self) -> Result<ExperimentSpec, CliError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        self.into_spec(file)
    }
}
