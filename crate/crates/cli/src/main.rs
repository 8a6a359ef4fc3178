//! `fracbvp` command-line driver.
//!
//! Every run writes `manifest.json` (inputs, version, timings, results) and
//! command-specific CSVs into the output directory. On failure it writes
//! `error.json` instead and exits with 2 (violated hypothesis or bad
//! input), 3 (numerical non-convergence) or 4 (I/O).

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use config::{Command, ConfigError, RunConfig};
use run::RunError;

#[derive(Parser, Debug)]
#[command(name = "fracbvp", version, about = "Positive solutions of fractional Dirichlet problems")]
struct Cli {
    /// Command to run; may be omitted when the config file names one.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: RunConfig,
}

fn emit_error(dir: Option<&PathBuf>, err: serde_json::Value, code: i32) -> ExitCode {
    let text = serde_json::to_string_pretty(&json!({ "error": err, "exit_code": code })).expect("json");
    eprintln!("{text}");
    if let Some(dir) = dir {
        let _ = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("error.json"), format!("{text}\n")));
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (file_cmd, base) = match &cli.config {
        Some(path) => match RunConfig::from_file(path) {
            Ok(v) => v,
            Err(ConfigError::Io(m)) => return emit_error(cli.flags.out.as_ref(), json!({ "kind": "io", "message": m }), 4),
            Err(ConfigError::Invalid(m)) => {
                return emit_error(cli.flags.out.as_ref(), json!({ "kind": "config", "message": m }), 2)
            }
        },
        None => (None, RunConfig::default()),
    };
    let cfg = base.overridden_by(&cli.flags);
    let dir = cfg.out_dir();
    let Some(cmd) = cli.command.or(file_cmd) else {
        return emit_error(
            Some(&dir),
            json!({ "kind": "config", "message": "no command given on the command line or in the config" }),
            2,
        );
    };
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return emit_error(None, json!({ "kind": "io", "message": format!("{}: {e}", dir.display()) }), 4);
    }

    let started = Instant::now();
    match run::execute(cmd, &cfg, &dir) {
        Ok(art) => {
            let mut inputs = serde_json::to_value(&cfg).expect("json");
            if let Some(map) = inputs.as_object_mut() {
                map.retain(|_, v| !v.is_null());
            }
            let manifest = json!({
                "command": cmd.name(),
                "version": env!("CARGO_PKG_VERSION"),
                "inputs": inputs,
                "outputs": art.files,
                "results": art.results,
                "timings": { "total_seconds": started.elapsed().as_secs_f64() },
                "timestamp": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            });
            let text = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
            if let Err(e) = std::fs::write(dir.join("manifest.json"), text) {
                return emit_error(None, json!({ "kind": "io", "message": e.to_string() }), 4);
            }
            ExitCode::SUCCESS
        }
        Err(e @ RunError::Solver(_)) | Err(e @ RunError::Io(_)) => emit_error(Some(&dir), e.to_json(), e.exit_code()),
    }
}
