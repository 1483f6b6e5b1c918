//! Command-line driver: configuration files, subcommands and output files.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Invocation, EXIT_CONFIG, EXIT_OK};
use config::OutputFormat;

#[derive(Parser, Debug)]
#[command(name = "qdcavity", version, about = "Quantum-dot cavity photon statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one steady state and print its observables.
    Simulate(CommonArgs),
    /// Run the configured grid and write one record per point.
    Sweep(CommonArgs),
    /// Compare the cluster expansion with the exact master equation.
    OracleCompare(CommonArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file, overriding `[output] path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep worker threads (default: available hardware threads).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Also write the time trajectory (simulate).
    #[arg(long)]
    pub trajectory: bool,
    /// Output format, overriding `[output] format`.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Jsonl => OutputFormat::JsonLines,
        }
    }
}

impl From<&CommonArgs> for Invocation {
    fn from(a: &CommonArgs) -> Self {
        Invocation {
            config_path: a.config.clone(),
            out: a.out.clone(),
            workers: a.workers.map(|w| w as usize),
            trajectory: a.trajectory,
            format: a.format.map(Into::into),
        }
    }
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(&a.into(), stdout),
        Command::Sweep(a) => commands::sweep(&a.into(), stdout),
        Command::OracleCompare(a) => commands::oracle_compare(&a.into(), stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
