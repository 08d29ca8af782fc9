//! Writes a synthetic logistic-regression problem in LIBSVM format.
//!
//! cargo run --release -p blockbfgs-cli --example make_synthetic -- --out synthetic.libsvm

use std::path::PathBuf;

use clap::Parser;

use blockbfgs::dataset::synthetic_logistic;
use blockbfgs::RandomStream;

#[derive(Parser)]
struct Args {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Scale of the first feature column.
    #[arg(long, default_value_t = 0.3)]
    max_scale: f64,
    /// Scale of the last feature column; intermediate columns decay geometrically.
    #[arg(long, default_value_t = 0.2)]
    min_scale: f64,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let data = synthetic_logistic(
        &mut RandomStream::new(args.seed),
        args.n,
        args.dim,
        args.max_scale,
        args.min_scale,
    );
    std::fs::write(&args.out, data.to_libsvm())?;
    println!(
        "wrote {} examples with {} features to {}",
        data.n(),
        data.dim(),
        args.out.display()
    );
    Ok(())
}
