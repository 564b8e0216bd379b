//! Command-line front end.
//!
//! ```text
//! lagphase solve         --config PATH [--out DIR]
//! lagphase verify-lemmas --n N --count N --seed N [--out DIR]
//! lagphase convergence   --config PATH --levels N [--out DIR]
//! lagphase diagnose      --config PATH --dump PATH [--out DIR]
//! ```
//!
//! Exit codes: 0 success, 1 a check reported a violation, 2 config or
//! validation error, 3 solver failure, 4 sampler exhaustion.

pub mod commands;
pub mod config;
pub mod expr;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::operator::LevelSampler;

pub use commands::{
    cmd_convergence, cmd_diagnose, cmd_solve, cmd_verify_lemmas, convergence_study, run_lemma_suites, solve_configured,
    write_atomic, ConvergenceTable, Context, LemmaArgs, LevelRow, Order, SolveRun, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK,
    EXIT_SAMPLER, EXIT_SOLVER,
};
pub use config::{ConfigError, OutputFormat, RunConfig};
pub use expr::{Expr, ParseError};

#[derive(Debug, Parser)]
#[command(name = "lagphase", version, about = "Dirichlet solver and estimate probes for the Lagrangian phase equation")]
pub struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Output directory; overrides output.directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured Dirichlet problem.
    Solve {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Run the randomized operator suites.
    VerifyLemmas {
        /// Dimension (2, 3 or 4).
        #[arg(long)]
        n: usize,
        /// Cases per suite.
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Manufactured-solution refinement study.
    Convergence {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long)]
        levels: usize,
    },
    /// Run the enabled probes on a stored solution dump.
    Diagnose {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "PATH")]
        dump: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let ctx = Context { out: cli.out, quiet: cli.quiet };
    match cli.command {
        Command::Solve { config } => cmd_solve(&config, &ctx),
        Command::VerifyLemmas { n, count, seed } => {
            cmd_verify_lemmas(&LemmaArgs { n, count, seed, sampler: LevelSampler::default() }, &ctx)
        }
        Command::Convergence { config, levels } => cmd_convergence(&config, levels, &ctx),
        Command::Diagnose { config, dump } => cmd_diagnose(&config, &dump, &ctx),
    }
}
