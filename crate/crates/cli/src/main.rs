use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use histkit_cli::emit::{emit, file_stem, write_atomic, Format};
use histkit_cli::sweep::{expand, parse_values, Axis};
use histkit_cli::{exit, parse_scenario, run, RunError, RunReport, Scenario, ScenarioError};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "histkit", version, about = "Run consistent-histories scenarios and emit reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario file without running it.
    Validate { file: PathBuf },
    /// Run one scenario.
    Run {
        file: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Run the Cartesian product of parameter values.
    Sweep {
        file: PathBuf,
        /// Dotted path into the scenario, e.g. `model.theta` or `families.0.basis`.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Comma-separated values for the matching `--param`.
        #[arg(long = "values", required = true)]
        values: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "json")]
    format: Vec<Format>,
    /// Worker threads; overrides HISTKIT_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

fn init_threads(flag: Option<usize>) -> Result<(), String> {
    let env = std::env::var("HISTKIT_THREADS").ok();
    let threads = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(v.trim().parse::<usize>().map_err(|_| format!("HISTKIT_THREADS='{v}' is not a count"))?),
        (None, None) => None,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err("thread count must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn summarize(report: &RunReport) {
    for c in &report.checks {
        let defect = c.worst_defect.map(|d| format!(" ({d:.3e})")).unwrap_or_default();
        eprintln!("  {:<11} {:?}{defect}", c.check, c.verdict);
    }
}

/// Runs and emits one scenario; returns its exit code.
fn run_one(scenario: &Scenario, sweep: Option<std::collections::BTreeMap<String, serde_json::Value>>, output: &Output) -> i32 {
    let start = Instant::now();
    let mut report = match run(scenario) {
        Ok(r) => r,
        Err(RunError::Scenario(e)) => {
            eprintln!("error: {e}");
            return exit::USAGE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return exit::NUMERICAL;
        }
    };
    report.sweep = sweep;
    let wall = start.elapsed().as_secs_f64();
    if let Err(e) = emit(&report, &output.out, &output.format) {
        eprintln!("error: {e}");
        return exit::NUMERICAL;
    }
    // wall time lives beside the report so the report itself stays reproducible
    let timing = serde_json::json!({ "scenario": report.scenario, "wall_time_seconds": wall });
    let timing_path = output.out.join(format!("{}.timing.json", file_stem(&report.scenario)));
    if let Err(e) = write_atomic(&timing_path, format!("{timing:#}\n").as_bytes()) {
        eprintln!("error: {e}");
        return exit::NUMERICAL;
    }
    eprintln!("{} ({wall:.3} s)", report.scenario);
    summarize(&report);
    if report.failed() {
        exit::CHECK_FAILED
    } else {
        exit::OK
    }
}

fn load(file: &Path) -> Result<Scenario, ScenarioError> {
    parse_scenario(file).map_err(|e| ScenarioError::new(e.path.clone(), format!("{} ({})", e.message, file.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Validate { file } => match load(&file) {
            Ok(s) => {
                println!("{}: ok ({} checks)", s.name, s.checks.len());
                exit::OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit::USAGE
            }
        },
        Command::Run { file, output } => {
            if let Err(e) = init_threads(output.threads) {
                eprintln!("error: {e}");
                return ExitCode::from(exit::USAGE as u8);
            }
            match load(&file) {
                Ok(s) => run_one(&s, None, &output),
                Err(e) => {
                    eprintln!("error: {e}");
                    exit::USAGE
                }
            }
        }
        Command::Sweep {
            file,
            params,
            values,
            output,
        } => {
            if let Err(e) = init_threads(output.threads) {
                eprintln!("error: {e}");
                return ExitCode::from(exit::USAGE as u8);
            }
            if params.len() != values.len() {
                eprintln!("error: give one --values list per --param");
                return ExitCode::from(exit::USAGE as u8);
            }
            let base = std::fs::read_to_string(&file)
                .map_err(|e| format!("cannot read {}: {e}", file.display()))
                .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).map_err(|e| format!("{}: {e}", file.display())));
            let base = match base {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit::USAGE as u8);
                }
            };
            let axes: Vec<Axis> = params
                .into_iter()
                .zip(&values)
                .map(|(path, list)| Axis {
                    path,
                    values: parse_values(list),
                })
                .collect();
            match expand(&base, &axes) {
                Ok(points) => points
                    .into_par_iter()
                    .map(|(scenario, point)| run_one(&scenario, Some(point), &output))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .max()
                    .unwrap_or(exit::OK),
                Err(e) => {
                    eprintln!("error: {e}");
                    exit::USAGE
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
