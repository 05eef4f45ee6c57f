//! `kfp`: config-driven experiments for the kinetic Fokker-Planck laboratory.
//!
//! Precedence: command-line flags override config scalars, which override
//! built-in defaults.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::Config;
use failure::Failure;

#[derive(Parser)]
#[command(name = "kfp", version, about = "Numerical experiments for the kinetic Kolmogorov-Fokker-Planck equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the config. 1 runs single-threaded.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Validate the config and print the plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the model problem and write a grid dump.
    Solve,
    /// Estimate ratios over a source corpus, with optional sweeps.
    VerifyEstimate,
    /// Quasi-metric, ball sandwich and doubling checks.
    GeometryTest,
    /// A_p constants of power weights and the kinetic functional.
    WeightsAp,
    /// Maximal and sharp function ratios with timing.
    MaximalBench,
    /// Coefficient oscillation tables.
    Vmo,
    /// Summarize CSV outputs.
    Report,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let workers = cli.workers.or(cfg.workers);
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::config("workers", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config("workers", e.to_string()))?;
    }
    let ctx = Context {
        out: cli.out.clone(),
        seed: cli.seed.unwrap_or(cfg.seed),
        dry_run: cli.dry_run,
    };
    if !ctx.dry_run {
        std::fs::create_dir_all(&ctx.out)?;
    }
    match cli.command {
        Command::Solve => commands::solve(&cfg, &ctx),
        Command::VerifyEstimate => commands::verify_estimate(&cfg, &ctx),
        Command::GeometryTest => commands::geometry_test(&cfg, &ctx),
        Command::WeightsAp => commands::weights_ap(&cfg, &ctx),
        Command::MaximalBench => commands::maximal_bench(&cfg, &ctx),
        Command::Vmo => commands::vmo(&cfg, &ctx),
        Command::Report => commands::report(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
