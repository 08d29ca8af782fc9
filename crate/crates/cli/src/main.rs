use std::process::ExitCode;

use clap::Parser;

use blockbfgs_cli::config::Args;
use blockbfgs_cli::run_experiment;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = Args::parse().resolve().and_then(|spec| run_experiment(&spec));
    match result {
        Ok(report) => {
            println!("f* = {:.16e}", report.f_star);
            for b in &report.best {
                println!(
                    "{:<14} best eta {:<8e} mean final error {:.3e}",
                    b.method, b.eta, b.mean_final_error
                );
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
