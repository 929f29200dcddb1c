//! `ringsim`: run ring/striped attention simulations, check them against the
//! dense reference, and print TMS tables.
//!
//! Exit codes: 0 success, 1 failed check, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ringsim", version, about = "Ring and striped causal attention simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one or both schedules and report per-round work.
    Simulate(SimulateArgs),
    /// Theoretical maximum speedup of striped over ring attention.
    Tms(TmsArgs),
    /// Run the property suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Ring,
    Striped,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Single,
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExecutorArg {
    Threaded,
    Sequential,
}

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub algo: AlgoArg,
    /// Number of simulated devices N.
    #[arg(long)]
    pub devices: usize,
    #[arg(long)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 64)]
    pub d_head: usize,
    /// Query rows per tile (defaults to the block size).
    #[arg(long)]
    pub tile_q: Option<usize>,
    /// Key columns per tile (defaults to the block size).
    #[arg(long)]
    pub tile_k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "double")]
    pub precision: PrecisionArg,
    /// Compare against the dense reference; fails above 1e-9 (double) or 1e-3 (single).
    #[arg(long)]
    pub check_oracle: bool,
    /// Scale scores by 1/sqrt(d_head).
    #[arg(long)]
    pub scaled: bool,
    #[arg(long, value_enum, default_value = "threaded")]
    pub executor: ExecutorArg,
    /// Disable rayon parallelism over tile rows inside each device.
    #[arg(long)]
    pub no_data_parallel: bool,
    /// Write per-device per-round work rows to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct TmsArgs {
    /// Built-in preset (1b, 3b, 7b) or path to a TOML preset file.
    #[arg(long)]
    pub model: Option<String>,
    /// Sequence-parallel degree N.
    #[arg(long)]
    pub sp: Option<u64>,
    /// Sequence lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seq_len: Vec<u64>,
    /// Relative cost of attention FLOPs (2 for A100 TF32, 1 for TPU).
    #[arg(long, default_value_t = 2.0)]
    pub flop_weight: f64,
    /// Model-parallel degree, carried as a label only.
    #[arg(long, default_value_t = 1)]
    pub mesh_mp: u64,
    /// Write rows to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Compare against a transcribed TMS table (CSV). Use `builtin` for the bundled one.
    #[arg(long)]
    pub golden: Option<String>,
}

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    /// Reduced sweep.
    #[arg(long)]
    pub quick: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Tms(args) => commands::tms(&args),
        Command::Verify(args) => Ok(commands::verify(&args)),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            commands::exit_code_for(&err)
        }
    }
}
