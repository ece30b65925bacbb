use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use koornwalk::Error;

mod commands;
mod output;
mod verify;

use output::{Format, Table};

/// Exit status for invalid parameters or configuration.
const EXIT_INVALID: u8 = 2;
/// Exit status when a quadrature rule would exceed its node cap.
const EXIT_QUAD_CAP: u8 = 3;

#[derive(Parser)]
#[command(name = "koornwalk", version, about = "Spectral tools for Koornwinder birth-death chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recurrence coefficients, shifted transition probabilities and stationary weights.
    Chain {
        #[command(flatten)]
        chain: ChainArgs,
        /// Number of sites to print.
        #[arg(long, default_value_t = 10)]
        rows: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Total variation distance to stationarity over a set of times.
    Tv {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        times: TimeArgs,
        #[command(flatten)]
        quad: QuadArgs,
        /// Fill the oracle column (matrix powers) for t up to this value.
        #[arg(long, default_value_t = 2000)]
        oracle_cap: u64,
        /// Add the explicit upper bound, calibrated at --anchor.
        #[arg(long)]
        bound: bool,
        #[arg(long, default_value_t = 100)]
        anchor: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Mixing times for a list of tolerances.
    Mix {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long = "eps", value_delimiter = ',', default_values_t = vec![0.5, 0.25, 0.1, 0.05])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        t_cap: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// The distribution after t steps, spectral and by matrix powers.
    Pt {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        t: u64,
        /// Oracle truncation: "auto" (origin + t + 1) or a site count.
        #[arg(long, default_value = "auto")]
        truncation: Truncation,
        /// Skip the oracle column when t exceeds this value.
        #[arg(long, default_value_t = 2000)]
        oracle_cap: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo estimate of the distribution after t steps.
    Simulate {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        t: u64,
        #[arg(long, default_value_t = 100_000)]
        walkers: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the invariant checks; exit 0 only if all pass.
    Verify {
        #[command(flatten)]
        chain: ChainArgs,
        /// Run a single named check instead of the suite.
        #[arg(long)]
        check: Option<verify::NamedCheck>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Auto,
    Value(f64),
}

impl FromStr for Lambda {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Lambda::Auto);
        }
        s.parse::<f64>()
            .map(Lambda::Value)
            .map_err(|_| format!("expected \"auto\" or a number, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Auto,
    Sites(usize),
}

impl FromStr for Truncation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Truncation::Auto);
        }
        s.parse::<usize>()
            .map(Truncation::Sites)
            .map_err(|_| format!("expected \"auto\" or a site count, got {s:?}"))
    }
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub beta: f64,
    /// Atom weight N at x = 1.
    #[arg(long = "N", default_value_t = 1.0)]
    pub big_n: f64,
    /// Shift: "auto" for the smallest valid one, or a number.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub lambda: Lambda,
    #[arg(long, default_value_t = 0)]
    pub origin: usize,
}

#[derive(Args, Debug, Clone)]
pub struct TimeArgs {
    /// Comma-separated times.
    #[arg(long = "t", value_delimiter = ',', conflicts_with = "t_range")]
    pub t: Vec<u64>,
    /// Log-spaced times as MIN:MAX:COUNT.
    #[arg(long)]
    pub t_range: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct QuadArgs {
    /// Largest quadrature rule to build.
    #[arg(long)]
    pub quad_cap: Option<usize>,
    /// Past the cap, use the capped rule with an error estimate (Chebyshev family only).
    #[arg(long)]
    pub allow_capped: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// A failed run: message and exit status.
pub struct Failure {
    pub message: String,
    pub code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParams(_)
            | Error::Domain(_)
            | Error::NegativeEntry { .. }
            | Error::NotPositiveRecurrent { .. }
            | Error::TruncationTooSmall { .. }
            | Error::InsufficientRange(_) => EXIT_INVALID,
            Error::DegreeTooLarge { .. } => EXIT_QUAD_CAP,
            _ => 1,
        };
        Failure {
            message: e.to_string(),
            code,
        }
    }
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            message: message.into(),
            code: EXIT_INVALID,
        }
    }
}

fn write_table(table: &Table, out: &OutputArgs) -> io::Result<()> {
    match &out.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(out.format, &mut w)?;
            w.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            table.write(out.format, &mut w)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("KOORNWALK_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::invalid(format!("KOORNWALK_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::invalid(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let (table, out, status) = match cli.command {
        Command::Chain { chain, rows, out } => (commands::chain(&chain, rows)?, out, 0),
        Command::Tv {
            chain,
            times,
            quad,
            oracle_cap,
            bound,
            anchor,
            out,
        } => (commands::tv(&chain, &times, &quad, oracle_cap, bound.then_some(anchor))?, out, 0),
        Command::Mix { chain, eps, t_cap, out } => (commands::mix(&chain, &eps, t_cap)?, out, 0),
        Command::Pt {
            chain,
            t,
            truncation,
            oracle_cap,
            out,
        } => (commands::pt(&chain, t, truncation, oracle_cap)?, out, 0),
        Command::Simulate {
            chain,
            t,
            walkers,
            seed,
            out,
        } => (commands::simulate(&chain, t, walkers, seed)?, out, 0),
        Command::Verify { chain, check, out } => {
            let (table, all_pass) = verify::run(&chain, check);
            (table, out, if all_pass { 0 } else { 1 })
        }
    };
    write_table(&table, &out).map_err(|e| Failure {
        message: format!("writing output: {e}"),
        code: 1,
    })?;
    Ok(status)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("koornwalk: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
