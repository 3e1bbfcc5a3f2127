use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod check;
mod detect;
mod sample;
mod simulate;
mod spec_args;

/// Community detection in heterogeneous (multi-type) networks.
#[derive(Parser)]
#[command(name = "hetcomm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect communities in a typed edge list.
    Detect(detect::DetectArgs),
    /// Run the planted-partition simulation study and emit one CSV row per
    /// (r3, rep, method, node type).
    Simulate(simulate::SimulateArgs),
    /// Evaluate the label-recovery conditions of a blockmodel spec.
    Check(check::CheckArgs),
    /// Draw one graph from a blockmodel spec and write it as an edge list.
    Sample(sample::SampleArgs),
}

/// A command error with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    /// Unreadable or malformed input.
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }

    /// Flags that cannot be satisfied for this input.
    pub fn flags(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::input(e)
    }
}

pub type CmdResult = Result<u8, Failure>;

/// Buffered writer to `path`, or stdout when absent.
pub fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn optional_path(p: &Option<PathBuf>) -> Option<&Path> {
    p.as_deref().filter(|p| p != &Path::new("-"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(a) => detect::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Check(a) => check::run(&a),
        Command::Sample(a) => sample::run(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
