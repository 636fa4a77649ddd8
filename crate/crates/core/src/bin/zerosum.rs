use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zerosum::cli::{self, GlobalOptions};

#[derive(Parser)]
#[command(name = "zerosum", version, about = "Zero-sum revenue-transfer analytics")]
struct Args {
    /// Scenario file (JSON, or CSV of plan_id,share rows)
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output file; standard output when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Plan index to treat as the focal plan (default: last)
    #[arg(long, global = true)]
    focal: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Implied moments, full covariance, gradient and caps as JSON
    Analyze,
    /// Focal variance along a decreasing focal-share grid, as CSV
    Sweep {
        /// start:stop:steps with start > stop > 0
        #[arg(long)]
        grid: String,
        /// proportional or single(i)
        #[arg(long, default_value = "proportional")]
        policy: String,
    },
    /// Monte Carlo summary of transfer draws
    Simulate {
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
        /// normal or shifted-exp
        #[arg(long, default_value = "normal")]
        dist: String,
        /// Also write every draw as CSV
        #[arg(long)]
        emit_draws: Option<PathBuf>,
    },
    /// Effective transfer caps under the zero-sum constraint
    Caps {
        /// Comma-separated nominal caps overriding the scenario's
        #[arg(long)]
        caps: Option<String>,
    },
    /// Random scenarios satisfying the monotonicity condition
    FindExamples {
        #[arg(long, default_value_t = 3)]
        plans: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = GlobalOptions {
        scenario: args.scenario,
        out: args.out,
        seed: args.seed,
        focal: args.focal,
    };
    let result = match args.command {
        Command::Analyze => cli::run_analyze(&opts),
        Command::Sweep { grid, policy } => cli::run_sweep(&opts, &grid, &policy).map(|line| eprintln!("{line}")),
        Command::Simulate { draws, dist, emit_draws } => {
            cli::run_simulate(&opts, draws, &dist, emit_draws.as_deref())
        }
        Command::Caps { caps } => caps
            .as_deref()
            .map(cli::parse_caps)
            .transpose()
            .and_then(|c| cli::run_caps(&opts, c)),
        Command::FindExamples { plans, count } => cli::run_find_examples(&opts, plans, count),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
