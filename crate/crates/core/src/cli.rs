//! Command line entry points.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::driver::{clear_exact, clear_heuristic, ClearingOptions, ClearingStatus};
use crate::error::Error;
use crate::io::{parse_instance, parse_solution, write_json, write_solution, SolutionDocument};
use crate::model::Instance;
use crate::verify::{oracle_clear, verify_solution, ORACLE_CAP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Parser)]
#[command(name = "dayahead", about = "Clear a day-ahead market order book", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Heuristic,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Clear an order book.
    Clear {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        abs_gap: f64,
        /// Written to standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a solution document against every equilibrium condition.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clear by enumerating every bid selection.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = ORACLE_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            Error::Numerical(_) => 1,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure {
            code: EXIT_INPUT,
            message: format!("cannot write {}: {e}", p.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    Ok(parse_instance(&read(path)?)?)
}

fn execute(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Clear {
            instance,
            mode,
            time_limit,
            abs_gap,
            out,
        } => {
            let inst = load(&instance)?;
            let time_limit = match time_limit {
                Some(s) if s.is_finite() && s >= 0.0 => Some(Duration::from_secs_f64(s)),
                Some(s) => {
                    return Err(Failure {
                        code: EXIT_INPUT,
                        message: format!("invalid time limit {s}"),
                    })
                }
                None => None,
            };
            let options = ClearingOptions {
                abs_gap,
                time_limit,
                ..ClearingOptions::default()
            };
            let result = match mode {
                ModeArg::Heuristic => clear_heuristic(&inst, &options)?,
                ModeArg::Exact => clear_exact(&inst, &options)?,
            };
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            emit(out.as_deref(), &write_solution(&SolutionDocument::from_result(&inst, &result)))?;
            Ok(match result.status {
                ClearingStatus::Optimal => EXIT_OK,
                ClearingStatus::IterationLimit | ClearingStatus::TimeLimit => EXIT_LIMIT,
            })
        }
        Command::Verify {
            instance,
            solution,
            tol,
            out,
        } => {
            let inst = load(&instance)?;
            let doc = parse_solution(&read(&solution)?)?;
            let (sol, prices) = doc.to_parts(&inst)?;
            let report = verify_solution(&inst, &sol, &prices, tol)?;
            emit(out.as_deref(), &write_json(&report))?;
            Ok(EXIT_OK)
        }
        Command::Oracle { instance, cap, out } => {
            let inst = load(&instance)?;
            let res = oracle_clear(&inst, cap)?;
            emit(out.as_deref(), &write_solution(&SolutionDocument::from_result(&inst, &res.result)))?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs one command; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
