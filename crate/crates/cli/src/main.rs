use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covext_cli::commands::{self, NpFlags, Report, SolveFlags, DEFAULT_SAMPLES};
use covext_cli::files::{to_json, FileOptions, MethodName};
use covext_cli::{CliError, EXIT_OK, EXIT_VERIFY};

#[derive(Parser)]
#[command(name = "covext", version, about = "Rational covariance extension and Nevanlinna-Pick interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Solver {
    /// Convergence tolerance on the CEE residual.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// Relative singular-value threshold for rank P.
    #[arg(long)]
    rank_tol: Option<f64>,
}

impl Solver {
    fn options(&self) -> FileOptions {
        FileOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            method: self.method,
            rank_tol: self.rank_tol,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a covariance extension problem.
    Extend {
        problem: PathBuf,
        #[command(flatten)]
        solver: Solver,
        /// Unit-circle grid size for the positive-realness check.
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a Nevanlinna-Pick interpolation problem.
    Nevpick {
        problem: PathBuf,
        #[command(flatten)]
        solver: Solver,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Use the T matrix scaling exactly as originally printed.
        #[arg(long)]
        paper_factor: bool,
        /// Fit the values as given instead of up to a positive scale.
        #[arg(long)]
        no_normalize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate covariances from a one-column CSV series.
    Estimate {
        series: PathBuf,
        #[arg(long)]
        lags: usize,
        #[arg(long)]
        unbiased: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Algebraic degree and a grid bound on the positive degree.
    Posdeg {
        problem: PathBuf,
        #[command(flatten)]
        solver: Solver,
        /// `uniform:K` or `random:D`; sized by the order when absent.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a solution file against its problem without solving.
    Verify {
        solution: PathBuf,
        problem: PathBuf,
        /// Defaults to the grid size recorded in the solution.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the spectral density and Re f on [0, π].
    Spectrum {
        solution: PathBuf,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn verdict(report: &Report) -> u8 {
    if report.pass {
        return EXIT_OK;
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        let op = if c.lower_bound { ">=" } else { "<=" };
        log::error!("check {} failed: {:e} (need {op} {:e})", c.name, c.value, c.limit);
    }
    EXIT_VERIFY
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Extend { problem, solver, samples, out } => {
            let flags = SolveFlags { options: solver.options(), samples };
            let (sol, report) = commands::extend(&read(&problem)?, &flags)?;
            emit(out.as_deref(), &to_json(&sol))?;
            Ok(verdict(&report))
        }
        Command::Nevpick { problem, solver, samples, paper_factor, no_normalize, out } => {
            let flags = SolveFlags { options: solver.options(), samples };
            let np = NpFlags { paper_factor, normalize: !no_normalize };
            let (sol, report) = commands::nevpick(&read(&problem)?, &flags, &np)?;
            emit(out.as_deref(), &to_json(&sol))?;
            Ok(verdict(&report))
        }
        Command::Estimate { series, lags, unbiased, out } => {
            let text = String::from_utf8(read(&series)?).map_err(|e| CliError::BadData(format!("series: {e}")))?;
            let problem = commands::estimate(&text, lags, unbiased)?;
            emit(out.as_deref(), &to_json(&problem))?;
            Ok(EXIT_OK)
        }
        Command::Posdeg { problem, solver, grid, seed, out } => {
            let report = commands::posdeg(&read(&problem)?, solver.options(), grid.as_deref(), seed)?;
            emit(out.as_deref(), &to_json(&report))?;
            Ok(EXIT_OK)
        }
        Command::Verify { solution, problem, samples, out } => {
            let report = commands::verify(&read(&solution)?, &read(&problem)?, samples)?;
            emit(out.as_deref(), &to_json(&report))?;
            Ok(verdict(&report))
        }
        Command::Spectrum { solution, samples, out } => {
            emit(out.as_deref(), &commands::spectrum(&read(&solution)?, samples)?)?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
