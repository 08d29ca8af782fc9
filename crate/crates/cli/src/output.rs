use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::BestEta;
use crate::CliError;

pub const CSV_HEADER: [&str; 7] = ["method", "eta", "seed", "datapasses", "seconds", "fvalue", "error"];

const SUMMARY_HEADER: [&str; 5] = ["method", "eta", "mean_final_error", "seeds_used", "diverged_runs"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub eta: f64,
    pub seed: u64,
    pub datapasses: f64,
    #[serde(rename = "seconds")]
    pub elapsed_seconds: f64,
    pub fvalue: f64,
    /// `fvalue - f_star`.
    pub error: f64,
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|source| CliError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_result_csv(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(CSV_HEADER).map_err(csv_error(path))?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            format_float(r.eta),
            r.seed.to_string(),
            format_float(r.datapasses),
            format_float(r.elapsed_seconds),
            format_float(r.fvalue),
            format_float(r.error),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(|source| CliError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_result_csv(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = r.headers().map_err(csv_error(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::Config(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(csv_error(path))
}

pub fn write_summary_csv(path: &Path, best: &[BestEta]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_error(path))?;
    for b in best {
        w.write_record([
            b.method.clone(),
            format_float(b.eta),
            format_float(b.mean_final_error),
            b.seeds_used.to_string(),
            b.diverged_runs.to_string(),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(|source| CliError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

/// A matplotlib script that plots, for every method, the error of its best
/// stepsize (first seed) against datapasses and against seconds.
pub fn plot_script(labels: &[&str]) -> String {
    let methods = labels.iter().map(|l| format!("{l:?}")).collect::<Vec<_>>().join(", ");
    format!(
        r#"# Plots error vs. datapasses and vs. seconds for the best stepsize of each method.
# Usage: python plot_errors.py  (run inside the output directory)
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
METHODS = [{methods}]


def read(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        return list(csv.DictReader(fh))


best = {{row["method"]: float(row["eta"]) for row in read("summary.csv")}}
fig, (by_pass, by_time) = plt.subplots(1, 2, figsize=(11, 4))
for method in METHODS:
    if method not in best:
        continue
    rows = [r for r in read(method + ".csv") if float(r["eta"]) == best[method]]
    seed = rows[0]["seed"]
    rows = [r for r in rows if r["seed"] == seed and float(r["error"]) > 0]
    label = "{{}} (eta={{:g}})".format(method, best[method])
    by_pass.semilogy([float(r["datapasses"]) for r in rows], [float(r["error"]) for r in rows], label=label)
    by_time.semilogy([float(r["seconds"]) for r in rows], [float(r["error"]) for r in rows], label=label)
by_pass.set_xlabel("datapasses")
by_time.set_xlabel("time (s)")
for ax in (by_pass, by_time):
    ax.set_ylabel("error")
    ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "errors.png"), dpi=150)
"#
    )
}
