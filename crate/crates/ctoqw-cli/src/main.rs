//! `ctoqw` command-line front end.
//!
//! Exit codes: 0 success, 1 other errors, 2 model file or usage error,
//! 3 uncertified model, 4 invalid density operator, 5 failed check.

mod commands;
mod reproduce;

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ctoqw::dynamics::DynamicsError;
use ctoqw::modelfile::ModelFileError;
use ctoqw::orthopoly::SymmetrizerError;
use ctoqw::stieltjes::StieltjesError;

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl Exit {
    pub fn parse(message: impl Into<String>) -> Self {
        Exit { code: 2, message: message.into() }
    }

    pub fn uncertified(message: impl Into<String>) -> Self {
        Exit { code: 3, message: message.into() }
    }

    pub fn bad_state(message: impl Into<String>) -> Self {
        Exit { code: 4, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Exit { code: 5, message: message.into() }
    }

    pub fn other(message: impl Into<String>) -> Self {
        Exit { code: 1, message: message.into() }
    }
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ModelFileError> for Exit {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::State(_) => Exit::bad_state(e.to_string()),
            _ => Exit::parse(e.to_string()),
        }
    }
}

impl From<SymmetrizerError> for Exit {
    fn from(e: SymmetrizerError) -> Self {
        match e {
            SymmetrizerError::Model(_) | SymmetrizerError::Mat(_) | SymmetrizerError::EmptyWindow(..) => Exit::other(e.to_string()),
            _ => Exit::uncertified(e.to_string()),
        }
    }
}

impl From<StieltjesError> for Exit {
    fn from(e: StieltjesError) -> Self {
        match e {
            StieltjesError::SupportBelowZero(_) => Exit::uncertified(e.to_string()),
            _ => Exit::other(e.to_string()),
        }
    }
}

impl From<DynamicsError> for Exit {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidState(_) => Exit::bad_state(e.to_string()),
            DynamicsError::Symmetrizer(s) => s.into(),
            DynamicsError::Stieltjes(s) => s.into(),
            _ => Exit::other(e.to_string()),
        }
    }
}

impl From<csv::Error> for Exit {
    fn from(e: csv::Error) -> Self {
        Exit::other(format!("writing CSV: {e}"))
    }
}

impl From<io::Error> for Exit {
    fn from(e: io::Error) -> Self {
        Exit::other(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "ctoqw", version, about = "Spectral analysis of continuous-time open quantum walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Km,
    Direct,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the symmetrized generator with multiplicities.
    Spectrum {
        model: PathBuf,
        /// Sites used for half-line (0..N-1) and line (-N..N-1) models.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral weight matrix at site 0: atoms and sampled densities.
    Weights {
        model: PathBuf,
        /// Use the finite window instead of the infinite-chain measure.
        #[arg(long)]
        window: Option<usize>,
        /// Density samples per interval of the support.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transition probability curve p_{to, from; rho}(t).
    Probability {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        from: i64,
        #[arg(long, allow_hyphen_values = true)]
        to: i64,
        /// State file with `format = 1` and `rho = [[...]]`.
        #[arg(long)]
        rho: PathBuf,
        /// `start:stop:count` or a comma separated list.
        #[arg(long, default_value = "0:4:9")]
        times: String,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recurrence verdicts for one state or a sample of states.
    Recurrence {
        model: PathBuf,
        #[arg(long, conflicts_with = "scan_rho")]
        rho: Option<PathBuf>,
        /// Number of sampled states, starting with the basis states and the maximally mixed state.
        #[arg(long)]
        scan_rho: Option<usize>,
        /// Site of a line model (0 or -1).
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        site: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The four line transforms obtained by folding, on a grid of z < 0.
    Fold {
        model: PathBuf,
        /// `start:stop:count` or a comma separated list of real z.
        #[arg(long, default_value = "-3:-0.1:10", allow_hyphen_values = true)]
        grid: String,
        /// Compare the folded and unfolded semigroups.
        #[arg(long)]
        check: bool,
        /// Half-width of the window used by `--check`.
        #[arg(long, default_value_t = 30)]
        sites: usize,
        #[arg(long, default_value_t = 0.8)]
        time: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every closed-form regression of the bundled example models.
    ReproduceAll,
}

/// CSV sink on a file or stdout.
pub fn sink(out: &Option<PathBuf>) -> Result<csv::Writer<Box<dyn Write>>, Exit> {
    let w: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).map_err(|e| Exit::other(format!("cannot create {}: {e}", path.display())))?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(w))
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Parses `start:stop:count` or `a,b,c`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, Exit> {
    let bad = || Exit::parse(format!("cannot read grid `{s}`: expected start:stop:count or a comma separated list"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return match n {
            0 => Err(bad()),
            1 => Ok(vec![a]),
            _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
        };
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn run(cli: Cli) -> Result<(), Exit> {
    match cli.command {
        Command::Spectrum { model, window, out } => commands::spectrum(&model, window, &out),
        Command::Weights { model, window, grid, out } => commands::weights(&model, window, grid, &out),
        Command::Probability { model, from, to, rho, times, method, out } => {
            commands::probability(&model, from, to, &rho, &parse_grid(&times)?, method, &out)
        }
        Command::Recurrence { model, rho, scan_rho, site, out } => commands::recurrence(&model, rho.as_deref(), scan_rho, site, &out),
        Command::Fold { model, grid, check, sites, time, out } => {
            commands::fold(&model, &parse_grid(&grid)?, check.then_some((sites, time)), &out)
        }
        Command::ReproduceAll => reproduce::run(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
