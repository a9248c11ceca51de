//! `nam`: batch front-end for exact measure computations on p-adic spaces.
//!
//! Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 input
//! error (unreadable file, schema violation, violated precondition).

use clap::{Parser, Subcommand};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

use nam_cli::runner::{run_file, RunOptions};
use nam_cli::scenario::ScenarioFile;
use nam_cli::{csv, oracle, InputError, DEFAULT_CAP};
use nam_core::json::{MatrixDoc, MeasureDoc, ProductPairDoc, WeakDistDoc};
use nam_core::padic::Mode;
use nam_core::rational::rat_from_str;

#[derive(Parser)]
#[command(
    name = "nam",
    about = "Exact non-Archimedean measure computations, batch style",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file (single scenario or batch) and emit a report.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit one flat CSV per scenario into this directory.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Ceiling for enumerated lattices and grids.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Check that a JSON file matches one of the documented schemas.
    Validate {
        file: PathBuf,
    },
    /// Enumerate measures on the unit-ball cell lattice over a weight grid.
    Oracle {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: i64,
        /// Comma-separated rational weights, e.g. "0,1/2,1".
        #[arg(long)]
        grid: String,
        /// Emit only probability measures (depth-first pruned).
        #[arg(long)]
        probability: bool,
        /// Value prime for s-adic mode; real mode when absent.
        #[arg(long)]
        sadic: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        /// Write the listing here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Run {
            scenario,
            out,
            csv: csv_dir,
            cap,
        } => cmd_run(&scenario, out.as_deref(), csv_dir.as_deref(), cap),
        Cmd::Validate { file } => cmd_validate(&file),
        Cmd::Oracle {
            p,
            n,
            m,
            grid,
            probability,
            sadic,
            cap,
            out,
        } => cmd_oracle(p, n, m, &grid, probability, sadic, cap, out.as_deref()),
    };
    match code {
        Ok(exit) => ExitCode::from(exit),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(
    scenario: &std::path::Path,
    out: Option<&std::path::Path>,
    csv_dir: Option<&std::path::Path>,
    cap: usize,
) -> Result<u8, InputError> {
    let report = run_file(scenario, RunOptions { cap })?;
    let bytes = report.to_json_bytes();
    match out {
        Some(path) => std::fs::write(path, &bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    if let Some(dir) = csv_dir {
        csv::emit(&report, dir)?;
    }
    Ok(report.exit_code() as u8)
}

fn cmd_validate(file: &std::path::Path) -> Result<u8, InputError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| InputError(format!("cannot read {}: {e}", file.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let kind = identify(&value)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "file": file.display().to_string(),
            "kind": kind,
            "valid": true,
        }))
        .expect("validation summary serializes")
    );
    Ok(0)
}

/// Try each documented schema in a fixed order; semantic validation (not
/// just shape) must succeed.
fn identify(value: &serde_json::Value) -> Result<&'static str, InputError> {
    if let Ok(doc) = serde_json::from_value::<MeasureDoc>(value.clone()) {
        doc.to_measure()?;
        return Ok("measure");
    }
    if let Ok(doc) = serde_json::from_value::<WeakDistDoc>(value.clone()) {
        doc.to_weak_distribution()?;
        return Ok("weak-distribution");
    }
    if let Ok(doc) = serde_json::from_value::<MatrixDoc>(value.clone()) {
        doc.to_operator()?;
        return Ok("matrix");
    }
    if let Ok(doc) = serde_json::from_value::<ProductPairDoc>(value.clone()) {
        doc.to_pair()?;
        return Ok("product-pair");
    }
    if let Ok(file) = serde_json::from_value::<ScenarioFile>(value.clone()) {
        let scenarios = file.into_scenarios();
        if scenarios.is_empty() {
            return Err(InputError("scenario batch is empty".into()));
        }
        return Ok("scenario");
    }
    Err(InputError(
        "file matches no documented schema (measure, weak-distribution, matrix, product-pair, scenario)"
            .into(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    p: u64,
    n: usize,
    m: i64,
    grid: &str,
    probability: bool,
    sadic: Option<u64>,
    cap: usize,
    out: Option<&std::path::Path>,
) -> Result<u8, InputError> {
    let grid = grid
        .split(',')
        .map(|s| rat_from_str(s.trim()).map_err(InputError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let mode = match sadic {
        None => Mode::Real,
        Some(s) => Mode::Sadic(s),
    };
    mode.validate(p)?;
    let measures = if probability {
        oracle::enumerate_probability_measures(p, n, m, mode, &grid, cap)?
    } else {
        oracle::enumerate_measures(p, n, m, mode, &grid, cap)?
    };
    let docs: Vec<MeasureDoc> = measures.iter().map(MeasureDoc::from_measure).collect();
    let mut text = serde_json::to_string_pretty(&json!({
        "count": docs.len(),
        "measures": docs,
    }))
    .expect("oracle listing serializes");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
