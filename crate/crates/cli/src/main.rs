//! `absorber`: decide absorption and related properties of finite
//! idempotent algebras given as operation tables.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use absorber_core::{DEFAULT_CAP, DEFAULT_WORK};

#[derive(Parser, Debug)]
#[command(
    name = "absorber",
    version,
    about = "Absorption in finite idempotent algebras"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Algebra file (`absorber-algebra v1` format).
    #[arg(long, global = true)]
    pub algebra: Option<PathBuf>,
    /// Comma-separated element indices or names.
    #[arg(long, global = true)]
    pub subset: Option<String>,
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Maximum tuples stored by any single closure or enumeration.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
    /// Maximum operation applications by any single closure.
    #[arg(long, global = true, default_value_t = DEFAULT_WORK)]
    pub work: u64,
    /// Worker threads for the parallel search loops.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Validate the algebra (and the subset, if given).
    Check,
    /// Decide Jónsson absorption of the subset.
    Jonsson,
    /// Search for a blocker of the subset.
    Blocker,
    /// Decide absorption of the subset.
    Absorb {
        /// Also search for an absorption term up to this arity.
        #[arg(long)]
        max_arity: Option<usize>,
    },
    /// Search for an absorption term of exactly this arity.
    Term {
        #[arg(long)]
        arity: usize,
    },
    /// Search for an essential subpower of this arity.
    Essential {
        #[arg(long)]
        arity: usize,
    },
    /// Decide whether the algebra has a near-unanimity term.
    Nu {
        /// Also build a near-unanimity term from per-singleton terms up to this arity.
        #[arg(long)]
        max_arity: Option<usize>,
    },
    /// Decide congruence distributivity (every singleton Jónsson absorbs).
    Cd,
    /// Build the blocker instance for a DIMACS 3-CNF formula.
    #[command(name = "reduce-3sat")]
    Reduce3sat {
        cnf: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build the blocker instance for a formula and check it against brute force.
    VerifyReduction { cnf: PathBuf },
    /// Slow reference implementations.
    Oracle {
        #[arg(value_enum)]
        which: OracleKind,
        /// Arity for the essential-subpower oracle.
        #[arg(long)]
        arity: Option<usize>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Blocker,
    Chain,
    Essential,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let report = commands::run(&cli);
    let elapsed = start.elapsed();
    report.print(cli.common.json, elapsed);
    ExitCode::from(report.exit)
}
