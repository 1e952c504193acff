//! `phi-heat <config-path> [--threads N] [--out DIR]`
//!
//! Runs one experiment described by a TOML config and writes
//! `manifest.json`, result files and `summary.txt` into the output
//! directory. Exit codes: 0 success, 2 invalid config, 3 numerical failure.

mod config;
mod error;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

/// Environment override for the output directory.
const OUT_ENV: &str = "PHI_HEAT_OUT";

#[derive(Debug, Parser)]
#[command(name = "phi-heat", version, about = "Diffusion experiments on model Φ-manifolds")]
struct Args {
    /// TOML run configuration.
    config: PathBuf,
    /// Cap on worker threads for every parallel section.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; beats PHI_HEAT_OUT and the config's out_dir.
    #[arg(long)]
    out: Option<String>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let out = args.out.clone().or_else(|| std::env::var(OUT_ENV).ok().filter(|s| !s.is_empty()));
    config::parse(&text)?.resolve(out)
}

fn write_text(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn main_inner(args: Args) -> Result<(), CliError> {
    if args.threads == Some(0) {
        return Err(CliError::Validation("`--threads` must be at least 1".into()));
    }
    let cfg = load(&args)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out)?;
    let manifest = json!({
        "tool": "phi-heat",
        "version": env!("CARGO_PKG_VERSION"),
        "threads": args.threads,
        "config": cfg,
    });
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let mut lines = vec![format!("{} {}", cfg.subcommand.name(), env!("CARGO_PKG_VERSION"))];
    match run::execute(&cfg, &out) {
        Ok(outcome) => {
            lines.extend(outcome.lines);
            if let Some(f) = outcome.failure {
                lines.push(format!("FAILED: {f}"));
                write_text(&out.join("summary.txt"), &lines)?;
                return Err(CliError::Numerical(f));
            }
            write_text(&out.join("summary.txt"), &lines)?;
            for l in &lines {
                println!("{l}");
            }
            Ok(())
        }
        Err(e) => {
            lines.push(format!("FAILED: {e}"));
            write_text(&out.join("summary.txt"), &lines)?;
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phi-heat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
