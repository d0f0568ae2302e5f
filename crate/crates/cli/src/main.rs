use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dampwave::harness::{resolve, run_scenario, Suite};
use dampwave::Error;

/// Runs one scenario suite and writes manifest.json, CSV series and summary.json.
#[derive(Parser)]
#[command(name = "dampwave", version)]
struct Cli {
    #[command(subcommand)]
    suite: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel closed forms, low-frequency representation, structural identities
    Kernels(RunArgs),
    /// Linear L^2 decay rates
    LinearDecay(RunArgs),
    /// L^inf and second time-derivative rates
    Smoothing(RunArgs),
    /// Convergence to the diffusion-wave profiles
    ProfileError(RunArgs),
    /// Zero-tensor consistency and amplitude scaling
    Nonlinear(RunArgs),
    /// Fixed-point iteration against time marching
    Picard(RunArgs),
    /// Inequalities, exponential fits and symbol-bound scans
    Audit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML); suite defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $DAMPWAVE_OUT/<name> or runs/<name>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (suite, args) = match cli.suite {
        Command::Kernels(a) => (Suite::Kernels, a),
        Command::LinearDecay(a) => (Suite::LinearDecay, a),
        Command::Smoothing(a) => (Suite::Smoothing, a),
        Command::ProfileError(a) => (Suite::ProfileError, a),
        Command::Nonlinear(a) => (Suite::Nonlinear, a),
        Command::Picard(a) => (Suite::Picard, a),
        Command::Audit(a) => (Suite::Audit, a),
    };
    let scenario = match resolve(suite, args.config.as_deref(), args.seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = args.out.unwrap_or_else(|| {
        let base = std::env::var_os("DAMPWAVE_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        base.join(&scenario.name)
    });
    match run_scenario(&scenario, &out) {
        Ok(o) => {
            for c in &o.results.checks {
                println!(
                    "[{}] {} {}: {:.6e}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.criterion,
                    c.label,
                    c.value
                );
            }
            println!("wrote {} files to {}", o.files.len(), out.display());
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Error::Config(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
