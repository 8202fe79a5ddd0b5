//! `safehouse-sim`: run custody-protocol scenarios, verify pinned reports,
//! and search for adversary loss bounds.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use safehouse_core::{UsdValue, WorldConfig, USD_UNIT};
use safehouse_sim::{adversary_loss_oracle, bundled, run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "safehouse-sim", about = "Safe-House custody protocol simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a JSON file path or a bundled name) and print its report.
    Run {
        scenario: String,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also export the public call log (JSON lines) to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a scenario and compare the report byte-for-byte against a pinned one.
    /// Exits 0 iff identical.
    Verify { scenario: String, expected_report: PathBuf },
    /// Exhaustive adversary search over withdraw/deposit schedules.
    Oracle {
        /// World configuration JSON (its params supply max_out and tolerance).
        config: PathBuf,
        #[arg(long)]
        depth: u32,
        /// Comma-separated USD values; defaults to 1.00..10.00 in whole steps.
        #[arg(long)]
        grid: Option<String>,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn load_scenario(reference: &str) -> Result<Scenario> {
    let path = PathBuf::from(reference);
    if path.exists() {
        let text =
            std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Scenario::from_json(&text)?);
    }
    bundled::load(reference)
        .with_context(|| format!("{reference} is neither a file nor a bundled scenario"))
}

fn parse_grid(raw: Option<&str>) -> Result<Vec<UsdValue>> {
    match raw {
        None => Ok((1..=10).map(|v| UsdValue(v * USD_UNIT)).collect()),
        Some(text) => {
            text.split(',').map(|part| UsdValue::parse(part.trim()).context("bad grid value")).collect()
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, report, log } => {
            let scenario = load_scenario(&scenario)?;
            let (run_report, world) = run_scenario(&scenario)?;
            let bytes = run_report.to_bytes();
            if let Some(path) = &report {
                std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = &log {
                std::fs::write(path, world.export_log())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scenario, expected_report } => {
            let scenario = load_scenario(&scenario)?;
            let (run_report, _) = run_scenario(&scenario)?;
            let produced = run_report.to_bytes();
            let expected = std::fs::read(&expected_report)
                .with_context(|| format!("reading {}", expected_report.display()))?;
            if produced == expected {
                println!(
                    "ok: report matches ({} bytes, digest {})",
                    produced.len(),
                    run_report.digest()
                );
                Ok(ExitCode::SUCCESS)
            } else {
                println!("mismatch: produced report differs from {}", expected_report.display());
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Oracle { config, depth, grid } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let world_config: WorldConfig = serde_json::from_str(&text)?;
            let max_out = UsdValue::parse(&world_config.params.max_out)?;
            let tolerance_bp = world_config.params.tolerance_bp;
            let grid = parse_grid(grid.as_deref())?;
            let result = adversary_loss_oracle(max_out, tolerance_bp, depth, &grid)?;
            println!("max_extracted: {}", result.max_extracted.render());
            println!("total_withdrawn_on_path: {}", result.total_withdrawn.render());
            println!("bound: {}", result.bound.render());
            println!("path: {}", result.path.join(", "));
            Ok(ExitCode::SUCCESS)
        }
        Command::ListScenarios => {
            for name in bundled::names() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
