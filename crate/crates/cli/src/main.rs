//! `thinfilm`: run the thin-film integrator, steady solvers and bound checks
//! from a TOML configuration.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{parse_config, ConfigError, Mode};

#[derive(Parser)]
#[command(name = "thinfilm", version, about = "Thin-film equation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate in time; writes snapshots, diagnostics and bound reports.
    Evolve(RunArgs),
    /// Steady profiles along a flux or mass schedule.
    Steady(RunArgs),
    /// Independent evolve runs over one parameter, in parallel.
    Sweep(RunArgs),
    /// Evolve plus the full bound suite; exits 2 if any bound fails.
    Check(RunArgs),
    /// Print every configuration key with its default.
    Reference,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    config: PathBuf,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, env = "THINFILM_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Seed for the randomized checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Snapshot times, comma separated (replaces `evolve.snapshot_times`).
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

fn execute(mode: Mode, args: &RunArgs, out_slot: &mut Option<PathBuf>) -> Result<i32> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut cfg = parse_config(&text, Some(mode), base)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
        cfg.raw.output_dir = Some(dir.clone());
    }
    if let Some(seed) = args.seed {
        cfg.raw.seed = seed;
    }
    if let Some(times) = &args.snapshots {
        let ev = cfg.raw.evolve.as_mut().ok_or_else(|| ConfigError {
            path: "--snapshots".into(),
            message: format!("mode {mode} has no time evolution"),
        })?;
        ev.snapshot_times = times.clone();
        ev.validate().map_err(|e| ConfigError {
            path: "--snapshots".into(),
            message: e.to_string(),
        })?;
    }
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    *out_slot = Some(dir.clone());
    match mode {
        Mode::Evolve => commands::cmd_evolve(&cfg, &text, &dir),
        Mode::Steady => commands::cmd_steady(&cfg, &text, &dir),
        Mode::Sweep => commands::cmd_sweep(&cfg, &text, &dir),
        Mode::Check => commands::cmd_check(&cfg, &text, &dir),
    }
}

fn error_record(e: &anyhow::Error) -> serde_json::Value {
    let kind = if let Some(c) = e.downcast_ref::<ConfigError>() {
        return json!({ "error": { "kind": "config", "key": c.path, "message": c.message } });
    } else if e.chain().any(|c| c.is::<std::io::Error>()) {
        "io"
    } else if e.chain().any(|c| c.is::<thinfilm::Error>()) {
        "solver"
    } else {
        "other"
    };
    let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
    json!({ "error": { "kind": kind, "message": format!("{e:#}"), "chain": chain } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Reference => {
            print!("{}", config::reference());
            return ExitCode::SUCCESS;
        }
        Command::Evolve(a) => (Mode::Evolve, a),
        Command::Steady(a) => (Mode::Steady, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Check(a) => (Mode::Check, a),
    };
    let mut out_dir = None;
    match execute(mode, args, &mut out_dir) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let record = error_record(&e);
            let text = serde_json::to_string_pretty(&record).expect("json");
            eprintln!("{text}");
            if let Some(dir) = out_dir {
                let _ = fs::write(dir.join("error.json"), format!("{text}\n"));
            }
            ExitCode::FAILURE
        }
    }
}
