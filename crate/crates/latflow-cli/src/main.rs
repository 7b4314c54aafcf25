//! Batch experiment runner for the latflow library.
//!
//! Exit codes: 0 success (no FAIL rows), 1 FAIL rows present, 2 config or
//! schema violation, 3 budget exceeded (partial records flushed).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use latflow::experiment::{self, ConfigMap, RunError};

#[derive(Parser)]
#[command(
    name = "latflow",
    version,
    about = "Lattice flow and Diophantine sweep runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        /// Config file (flat key = value with one [params] block).
        config: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the `out` key).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores); env LATFLOW_WORKERS also applies.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the scenario catalog with parameter documentation.
    ListScenarios,
    /// Re-verify the minimal input attached to one JSON record line.
    Replay {
        /// File containing a single record (one JSON object).
        record: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            workers,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            let mut cfg = match ConfigMap::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return Ok(ExitCode::from(2));
                }
            };
            if let Some(s) = seed {
                cfg.set_top("seed", s.to_string());
            }
            match experiment::run_config(&cfg, out.as_deref(), workers) {
                Ok(summary) => {
                    for path in &summary.written {
                        println!("wrote {}", path.display());
                    }
                    println!(
                        "{}: {} rows, {} FAIL{}",
                        summary.scenario,
                        summary.rows,
                        summary.fail_rows,
                        if summary.truncated { ", TRUNCATED" } else { "" }
                    );
                    if summary.truncated {
                        Ok(ExitCode::from(3))
                    } else if summary.fail_rows > 0 {
                        Ok(ExitCode::from(1))
                    } else {
                        Ok(ExitCode::SUCCESS)
                    }
                }
                Err(RunError::Config(e)) => {
                    eprintln!("config error: {e}");
                    Ok(ExitCode::from(2))
                }
                Err(RunError::Budget(e)) => {
                    eprintln!("budget exceeded: {e}");
                    Ok(ExitCode::from(3))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::ListScenarios => {
            use std::fmt::Write as _;
            let mut out = String::new();
            for doc in experiment::catalog() {
                let _ = writeln!(out, "{}", doc.tag);
                let _ = writeln!(out, "  {}", doc.summary);
                let _ = writeln!(out, "  csv columns: {}", doc.csv_columns);
                for p in &doc.params {
                    let req = if p.required { "required" } else { "optional" };
                    let default = if p.default.is_empty() {
                        String::new()
                    } else {
                        format!(", default {}", p.default)
                    };
                    let _ = writeln!(
                        out,
                        "    {} ({}, {req}{default}): {}",
                        p.name, p.kind, p.help
                    );
                }
                let _ = writeln!(out, "  example:");
                for line in doc.example.lines() {
                    let _ = writeln!(out, "    {line}");
                }
                let _ = writeln!(out);
            }
            // A closed pipe (e.g. | head) is not an error for a listing.
            use std::io::Write as _;
            let _ = std::io::stdout().write_all(out.as_bytes());
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { record } => {
            let text = std::fs::read_to_string(&record)
                .with_context(|| format!("reading record {}", record.display()))?;
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .context("record file is empty")?;
            let value: serde_json::Value =
                serde_json::from_str(line).context("record is not valid JSON")?;
            match experiment::replay_record(&value, latflow::lattice::DEFAULT_ENUM_BUDGET) {
                Ok((ok, message)) => {
                    println!("{message}");
                    Ok(if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    })
                }
                Err(RunError::Config(e)) => {
                    eprintln!("config error: {e}");
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}
