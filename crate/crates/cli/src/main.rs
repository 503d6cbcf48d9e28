use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eit_cli::commands::{self, Ctx};
use eit_cli::config::RunConfig;
use eit_core::error::Error;

/// Monotonicity-based shape reconstruction for electrical impedance
/// tomography on the unit disk.
#[derive(Parser)]
#[command(name = "eitmono", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path overrides, e.g. --set electrodes.k=32 (repeatable).
    #[arg(long = "set")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the per-cell and per-current loops (0 = auto).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate electrode voltage data for a phantom.
    Simulate(CommonArgs),
    /// Reconstruct an indicator field from voltage data.
    Reconstruct(CommonArgs),
    /// Electrode-count convergence study and sandwich experiment.
    Convergence(CommonArgs),
    /// Run the built-in property suite.
    Selftest {
        /// Worker threads (0 = auto).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads > 1 {
        eprintln!("warning: built without the 'parallel' feature; --threads ignored");
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Solver(_) | Error::Fem(_) => 2,
        _ => 1,
    }
}

fn build_ctx(args: &CommonArgs) -> Result<Ctx, Error> {
    configure_threads(args.threads);
    let config = RunConfig::load(&args.config, &args.set)?;
    let config_dir = args
        .config
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Ctx {
        config,
        config_dir,
        out_dir: args.out.clone(),
    })
}

fn run(cli: Cli) -> Result<(), (u8, Error)> {
    match cli.command {
        Command::Simulate(args) => {
            let ctx = build_ctx(&args).map_err(|e| (exit_code_for(&e), e))?;
            commands::cmd_simulate(&ctx).map_err(|e| (exit_code_for(&e), e))
        }
        Command::Reconstruct(args) => {
            let ctx = build_ctx(&args).map_err(|e| (exit_code_for(&e), e))?;
            commands::cmd_reconstruct(&ctx).map_err(|e| (exit_code_for(&e), e))
        }
        Command::Convergence(args) => {
            let ctx = build_ctx(&args).map_err(|e| (exit_code_for(&e), e))?;
            commands::cmd_convergence(&ctx).map_err(|e| (exit_code_for(&e), e))
        }
        Command::Selftest { threads } => {
            configure_threads(threads);
            match commands::cmd_selftest() {
                Ok(true) => Ok(()),
                Ok(false) => Err((3, Error::Config("property suite reported failures".into()))),
                Err(e) => Err((exit_code_for(&e), e)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err}");
            ExitCode::from(code)
        }
    }
}
