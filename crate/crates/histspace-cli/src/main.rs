//! `histspace`: run history-space scenarios and emit verification reports.
//!
//! Exit codes: 0 when every requested check passes its tolerance, 2 when a
//! check fails, 1 on input or environment errors (no report is written in
//! that case).

mod builtin;
mod report;
mod run;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::report::render_text;
use crate::run::Flags;
use crate::scenario::{InputError, ScenarioFile};

#[derive(Parser)]
#[command(
    name = "histspace",
    version,
    about = "Finite-dimensional history-space laboratory: partitions of identity, \
             Born path measures, event PVMs, consistency defects and trajectory samplers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file (JSON) or a built-in scenario by name.
    Run {
        /// Path to a scenario file, or one of the built-in names from `list`.
        scenario: String,
        /// Directory for report.json and trajectory CSV output.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the sampling seed from the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides every check tolerance with one global value.
        #[arg(long)]
        tol: Option<f64>,
        /// Worker threads for parallel sections (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Stdout format for the report.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Cap on the number of enumerated histories.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// List the built-in scenarios.
    List,
}

fn load_scenario(name: &str) -> Result<ScenarioFile, InputError> {
    let path = Path::new(name);
    if !path.exists() {
        if let Some(file) = builtin::expand(name) {
            return Ok(file);
        }
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read scenario `{name}`: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| InputError(format!("cannot parse scenario `{name}`: {e}")))
}

fn run_command(
    scenario: &str,
    out: PathBuf,
    seed: Option<u64>,
    tol: Option<f64>,
    threads: Option<usize>,
    format: Format,
    budget: Option<usize>,
) -> Result<bool, InputError> {
    if let Some(n) = threads {
        // ignore the error when a pool already exists (tests share one)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let file = load_scenario(scenario)?;
    std::fs::create_dir_all(&out)
        .map_err(|e| InputError(format!("cannot create {}: {e}", out.display())))?;
    let report = run::execute(
        file,
        &Flags {
            out: out.clone(),
            seed,
            tol,
            budget,
        },
    )?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| InputError(format!("cannot serialize report: {e}")))?;
    let report_path = out.join("report.json");
    std::fs::write(&report_path, &json)
        .map_err(|e| InputError(format!("cannot write {}: {e}", report_path.display())))?;
    match format {
        Format::Json => println!("{json}"),
        Format::Text => print!("{}", render_text(&report)),
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List => {
            for entry in builtin::catalog() {
                println!("{:8} {}", entry.name, entry.summary);
            }
            ExitCode::SUCCESS
        }
        Cmd::Run {
            scenario,
            out,
            seed,
            tol,
            threads,
            format,
            budget,
        } => match run_command(&scenario, out, seed, tol, threads, format, budget) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(1)
            }
        },
    }
}
