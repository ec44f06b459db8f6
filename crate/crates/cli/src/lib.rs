//! Library half of the `ivdf` binary: argument definitions, command
//! dispatch and report rendering. `main.rs` only adds timing, output and
//! exit codes.

pub mod commands;
pub mod expr;
pub mod report;
pub mod suite;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use commands::{GuessArgs, Global, PriceMethod, SeriesTarget};
use report::Report;
use suite::Level;

/// Exit code when the command ran but at least one check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed expressions, out-of-domain inputs.
    #[error("usage: {0}")]
    Usage(String),
    /// The request was valid but the numerics could not finish it.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<ivdf_core::Error> for CliError {
    fn from(e: ivdf_core::Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "ivdf", version, about = "High-precision implied volatility, its auxiliary function F, and ODE guessing")]
pub struct Cli {
    /// Working precision in bits.
    #[arg(long, global = true, default_value_t = 256)]
    pub bits: u32,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Significant digits in CSV output.
    #[arg(long, global = true, default_value_t = 30)]
    pub digits: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Black-Scholes call price (r = 0).
    Price {
        #[arg(long)]
        spot: String,
        #[arg(long)]
        strike: String,
        #[arg(long)]
        maturity: String,
        #[arg(long)]
        sigma: String,
        /// closed, roper or both.
        #[arg(long, default_value = "both")]
        method: String,
    },
    /// Implied volatility of a call quote.
    #[command(name = "implied-vol")]
    ImpliedVol {
        #[arg(long)]
        spot: String,
        #[arg(long)]
        strike: String,
        #[arg(long)]
        maturity: String,
        #[arg(long)]
        call: String,
    },
    /// f(K, T): implied volatility on the curve S = eK, c = (e-1)K + eK^2.
    #[command(name = "f")]
    SmallF {
        #[arg(long)]
        strike: String,
        #[arg(long, default_value = "1")]
        maturity: String,
    },
    /// The auxiliary function F(x).
    #[command(name = "F")]
    BigF {
        #[arg(long)]
        x: String,
    },
    /// Inverse of F on (0, 1/e).
    #[command(name = "F-inv")]
    FInv {
        #[arg(long)]
        y: String,
    },
    /// Asymptotic check near 0.
    Asympt {
        /// One of N_PRIME_REMAINDER, F_LEADING_ORDER, F_LOG, FINV_BOUND,
        /// LOGF_REMAINDER, FINV_SHARP.
        #[arg(long)]
        kind: String,
        #[arg(long = "grid-min")]
        grid_min: Option<String>,
        #[arg(long = "grid-max")]
        grid_max: Option<String>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Taylor expansion of F, Finv, f or the trivariate implied volatility I3.
    Series {
        #[arg(long)]
        target: String,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        center: Option<String>,
        #[arg(long, default_value = "1")]
        maturity: String,
    },
    /// Search for a linear ODE with polynomial coefficients.
    Guess {
        /// f, Finv or file.
        #[arg(long)]
        target: String,
        /// Coefficient file (one per line; rationals give an exact check).
        #[arg(long)]
        file: Option<String>,
        #[arg(long, default_value_t = 6)]
        rmax: usize,
        #[arg(long, default_value_t = 6)]
        dmax: usize,
        #[arg(long, default_value_t = 64)]
        ncoeffs: usize,
    },
    /// Every acceptance check, aggregated.
    Suite {
        #[arg(long, default_value = "fast")]
        level: String,
    },
}

impl Cli {
    pub fn global(&self) -> Global {
        Global { bits: self.bits, digits: self.digits }
    }
}

/// Runs the parsed command and returns its report.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let g = cli.global();
    match &cli.command {
        Command::Price { spot, strike, maturity, sigma, method } => {
            let m: PriceMethod = method.parse()?;
            commands::price(spot, strike, maturity, sigma, m, g)
        }
        Command::ImpliedVol { spot, strike, maturity, call } => commands::implied(spot, strike, maturity, call, g),
        Command::SmallF { strike, maturity } => commands::f(strike, maturity, g),
        Command::BigF { x } => commands::big_f(x, g),
        Command::FInv { y } => commands::f_inv(y, g),
        Command::Asympt { kind, grid_min, grid_max, points } => {
            commands::asympt(kind, grid_min.as_deref(), grid_max.as_deref(), *points, g)
        }
        Command::Series { target, order, center, maturity } => {
            let t: SeriesTarget = target.parse()?;
            commands::series(t, *order, center.as_deref(), maturity, g)
        }
        Command::Guess { target, file, rmax, dmax, ncoeffs } => {
            let args = GuessArgs {
                target,
                file: file.as_deref(),
                r_max: *rmax,
                d_max: *dmax,
                n_coeffs: *ncoeffs,
            };
            commands::guess(&args, g)
        }
        Command::Suite { level } => {
            let l: Level = level.parse()?;
            suite::suite(l)
        }
    }
}

/// Renders `r` in `format`.
pub fn render(r: &Report, format: Format, digits: usize) -> String {
    match format {
        Format::Json => r.to_json() + "\n",
        Format::Csv => r.to_csv(digits),
        Format::Text => r.to_text(),
    }
}
