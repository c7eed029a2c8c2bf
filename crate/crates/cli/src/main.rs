//! `groundphase run <config>`: simulate one scenario and write CSV, JSON and
//! SVG results plus a `manifest.json`.
//!
//! Exit codes: 1 unreadable or malformed config, 2 invalid scenario, 3
//! numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod scenarios;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Plan, ScenarioConfig};
use scenarios::Failure;

#[derive(Parser)]
#[command(name = "groundphase", version, about = "Ground-state phase control scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of csv,json,svg.
        #[arg(long)]
        formats: Option<String>,
        /// Reserved; no scenario is stochastic yet.
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Exit {
    Parse(String),
    Invalid(String),
    Numerical(String),
}

impl Exit {
    fn code(&self) -> u8 {
        match self {
            Exit::Parse(_) => 1,
            Exit::Invalid(_) => 2,
            Exit::Numerical(_) => 3,
        }
    }
}

fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn execute(config: &Path, out: Option<PathBuf>, formats: Option<String>, seed: Option<u64>) -> Result<Plan, Exit> {
    let text = fs::read_to_string(config).map_err(|e| Exit::Parse(format!("{}: {e}", config.display())))?;
    let cfg = ScenarioConfig::parse(&text).map_err(|e| Exit::Parse(format!("{}: {e}", config.display())))?;
    let plan = cfg
        .validate(out, formats.as_deref())
        .map_err(|e| Exit::Invalid(e.to_string()))?;
    let outputs = scenarios::run(&plan).map_err(|f| match f {
        Failure::Validation(m) => Exit::Invalid(m),
        Failure::Numerical(m) => Exit::Numerical(m),
    })?;

    let mut files = outputs.files;
    let mut names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    names.push("manifest.json");
    names.sort_unstable();
    let manifest = json!({
        "kind": plan.kind.as_str(),
        "seed": seed,
        "formats": plan.formats,
        "integrator": plan.integrator,
        "files": names,
        "results": outputs.results,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    files.push(("manifest.json".into(), text.into_bytes()));
    write_all(&plan.output, &files)
        .map_err(|e| Exit::Invalid(format!("`output`: cannot write {}: {e}", plan.output.display())))?;
    Ok(plan)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        formats,
        seed,
    } = cli.command;
    match execute(&config, out, formats, seed) {
        Ok(plan) => {
            println!("wrote {}", plan.output.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (label, msg) = match &e {
                Exit::Parse(m) => ("config error", m),
                Exit::Invalid(m) => ("invalid scenario", m),
                Exit::Numerical(m) => ("numerical failure", m),
            };
            eprintln!("groundphase: {label}: {msg}");
            ExitCode::from(e.code())
        }
    }
}
