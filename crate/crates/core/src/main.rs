use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use laplift::cli::{exit_code, run, Outcome, Overrides, EXIT_CONFIG};
use laplift::config::RunConfig;

/// Convex lifting solver for Laplacian-regularized labeling problems.
#[derive(Parser, Debug)]
#[command(name = "laplift", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-pixel kernels.
    #[arg(long)]
    workers: Option<usize>,
    /// Force fixed-order reductions.
    #[arg(long)]
    deterministic: bool,
    /// Iteration cap (overrides the config).
    #[arg(long)]
    max_iter: Option<usize>,
    /// JSON-lines file of residual checks, relative to the output directory.
    #[arg(long)]
    log_progress: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        max_iter: args.max_iter,
        deterministic: args.deterministic,
        log_progress: args.log_progress,
    };
    let result = run(cfg, &overrides);
    match &result {
        Ok(Outcome::Success { summary }) => println!("{}", summary.display()),
        Ok(Outcome::InvariantFailure { summary, failed }) => {
            eprintln!("invariant failure in: {}", failed.join(", "));
            println!("{}", summary.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
