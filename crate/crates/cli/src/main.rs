// SPDX-License-Identifier: Apache-2.0

//! `wolff-trace` command-line interface.
//!
//! Exit codes: 0 pass, 1 IO/parse/usage error, 2 invariant violation,
//! 3 infeasible or degenerate instance.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wolff_trace::Error;

use report::{emit, pretty, RunReport};

#[derive(Parser, Debug)]
#[command(name = "wolff-trace", version, about = "Dyadic and continuous Wolff potentials and trace-inequality certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Instance file (`wolff-trace/1` JSON).
    #[arg(long, global = true)]
    pub instance: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Number of sampled lattice shifts.
    #[arg(long, global = true, default_value_t = 64)]
    pub shifts: usize,
    /// Ascent restarts for best-constant estimation.
    #[arg(long, global = true, default_value_t = 32)]
    pub restarts: usize,
    /// Ascent convergence tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Override the window levels as `min:max`.
    #[arg(long, global = true, value_parser = parse_levels, allow_hyphen_values = true)]
    pub window_levels: Option<(i32, i32)>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Power,
    Riesz,
    SingleCube,
}

/// Generator parameters shared by `gen` and `family`.
#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub sigma_atoms: usize,
    #[arg(long, default_value_t = 4)]
    pub mu_atoms: usize,
    #[arg(long, default_value_t = 1)]
    pub roots_per_axis: i64,
    #[arg(long, value_enum, default_value_t = KernelKind::Power)]
    pub kernel: KernelKind,
    /// Power-kernel exponent range `min:max`.
    #[arg(long, value_parser = parse_range, default_value = "0:1", allow_hyphen_values = true)]
    pub gamma: (f64, f64),
    /// Power-kernel per-cube jitter factor upper bound.
    #[arg(long, default_value_t = 2.0)]
    pub jitter: f64,
    /// Riesz order range `min:max`.
    #[arg(long, value_parser = parse_range, default_value = "0.2:0.8")]
    pub alpha: (f64, f64),
    /// Kernel value of the single-cube class.
    #[arg(long, default_value_t = 1.0)]
    pub cube_value: f64,
    #[arg(long, value_parser = parse_range, default_value = "0.1:1")]
    pub mass: (f64, f64),
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Redraw kernels until the DLBO constant is at most this.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub max_dlbo: f64,
    #[arg(long, default_value_t = 64)]
    pub max_attempts: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded instance file.
    Gen(GenArgs),
    /// DLBO constant and per-cube averaged-kernel ranges.
    Dlbo,
    /// Wolff potentials at the mu atoms and the Wolff energy.
    Wolff,
    /// Energy of T[mu] against sigma.
    Energy,
    /// Diagonal-case Carleson constant.
    Carleson,
    /// Deflated measure mu_1 and its Carleson constant.
    Mu1,
    /// Best trace constant against the Wolff-potential certificate.
    Certify,
    /// Certify a seeded family of generated instances.
    Family {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Fail (exit 2) when max/min of the ratios exceeds this.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Ratio of the energy to the Wolff energy.
    VerifyWolff,
    /// Continuous energy against the shifted dyadic supremum.
    CompareContinuum,
    /// Naive versus tree evaluation timings.
    Bench {
        /// Comma-separated depths.
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 2, 4, 6, 8, 10])]
        depths: Vec<usize>,
        /// Comma-separated sigma atom counts.
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1_000, 10_000])]
        atoms: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Recompute and freeze the acceptance windows.
    Calibrate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Dlbo => "dlbo",
            Command::Wolff => "wolff",
            Command::Energy => "energy",
            Command::Carleson => "carleson",
            Command::Mu1 => "mu1",
            Command::Certify => "certify",
            Command::Family { .. } => "family",
            Command::VerifyWolff => "verify-wolff",
            Command::CompareContinuum => "compare-continuum",
            Command::Bench { .. } => "bench",
            Command::Calibrate => "calibrate",
        }
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `a:b`, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("bad value {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad value {b:?}"))?;
    Ok((a, b))
}

fn parse_levels(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = parse_pair(s)?;
    if a > b {
        return Err(format!("level range {a}:{b} is empty"));
    }
    Ok((a, b))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b): (f64, f64) = parse_pair(s)?;
    if !(a <= b) {
        return Err(format!("range {a}:{b} is empty"));
    }
    Ok((a, b))
}

/// Usage/IO/parse problems are 1; everything the library rejects about the
/// mathematics of a valid input is 3.
fn error_exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_)
        | Error::Json(_)
        | Error::Schema(_)
        | Error::InvalidWindow(_)
        | Error::InvalidMeasure(_)
        | Error::InvalidKernel(_)
        | Error::InvalidExponents(_)
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. } => 1,
        _ => 3,
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("WOLFF_TRACE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring WOLFF_TRACE_THREADS={v:?}"),
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let start = Instant::now();
    let common = &cli.common;
    match &cli.command {
        Command::Gen(args) => {
            let inst = commands::gen(args, common)?;
            emit(&inst.to_pretty_json(), common.out.as_deref())?;
            return Ok(0);
        }
        Command::Calibrate => {
            let windows = wolff_trace::calibration::calibrate()?;
            emit(&pretty(&windows), common.out.as_deref())?;
            return Ok(0);
        }
        _ => {}
    }
    let (hash, outcome) = commands::dispatch(&cli.command, common)?;
    let text = match common.format {
        Format::Json => {
            let total_ms = start.elapsed().as_secs_f64() * 1e3;
            pretty(&RunReport::new(cli.command.name(), hash.as_deref(), &outcome, total_ms))
        }
        Format::Csv => match &outcome.csv {
            Some(t) => t.render(),
            None => {
                return Err(Error::InvalidArgument(format!("`{}` has no CSV form", cli.command.name())));
            }
        },
    };
    emit(&text, common.out.as_deref())?;
    if let report::Status::Violation(m) | report::Status::Degenerate(m) = &outcome.status {
        eprintln!("{}: {m}", cli.command.name());
    }
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits 2 on usage errors, which is our violation code
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            match (&e, &cli.common.instance) {
                (Error::Json(_) | Error::Io(_) | Error::Schema(_), Some(path)) => {
                    eprintln!("error: {}: {e}", path.display())
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(error_exit_code(&e))
        }
    }
}
