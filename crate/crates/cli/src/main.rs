mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use weylspec::Complex64;

#[derive(Debug, Parser)]
#[command(name = "weylspec", version, about = "M-functions and spectral classification of discrete symplectic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Check the structural identities of the configured system.
    Validate,
    /// Evaluate M at one point (`--lambda`) or on a grid (`--range`).
    Mfun,
    /// Classify one real point.
    Classify,
    /// Classify a grid of real points and list the point spectrum.
    Spectrum,
    /// Spectral-function increments over consecutive subintervals.
    Tau,
    /// Apply the resolvent to the configured right-hand side.
    Resolve,
    /// Finite-section eigenvalues from the tridiagonal and determinant oracles.
    Oracle,
    /// Compare eigenvalues for the configured and the alternative boundary matrix.
    Interlace,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Mfun => "mfun",
            Command::Classify => "classify",
            Command::Spectrum => "spectrum",
            Command::Tau => "tau",
            Command::Resolve => "resolve",
            Command::Oracle => "oracle",
            Command::Interlace => "interlace",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct Flags {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Convergence tolerance of the Weyl-disk limit.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// First node of the ν schedule.
    #[arg(long, global = true)]
    nu0: Option<f64>,
    #[arg(long, global = true)]
    nu_ratio: Option<f64>,
    #[arg(long, global = true)]
    nu_count: Option<usize>,
    /// Cap of the dyadic N schedule.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    range: Option<Vec<f64>>,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// A complex number such as `0.5+0.5i`, `2i` or `-1`.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_complex)]
    lambda: Option<Complex64>,
    /// Index window for `resolve` output and `oracle` truncation size.
    #[arg(long, global = true)]
    window: Option<usize>,
}

/// Parses `a`, `bi`, `a+bi` and `a-bi`, with exponents allowed.
fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse {s:?} as a complex number");
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |x: &str| -> Result<f64, String> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(i) => Ok(Complex64::new(body[..i].parse().map_err(|_| bad())?, imag(&body[i..])?)),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match commands::run(cli.command, &cli.flags, start) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
