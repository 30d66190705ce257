use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smmc::config::Mode;
use smmc::report::{certificate, compare_controllers, run_single, ReportError};
use smmc::{parse_config, RunConfig, OUT_DIR_ENV};

/// Sliding-mode torque control of a doubly-fed induction generator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured controller.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; SMMC_OUT_DIR takes precedence.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate several controllers on one scenario and write a report.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated, e.g. smc1,smc2,smmc. Defaults to `[compare]`.
        #[arg(long, value_delimiter = ',')]
        controllers: Option<Vec<String>>,
    },
    /// Print the stability certificates of every configured controller.
    CheckStability {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: smmc::ConfigError },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    parse_config(&text).map_err(|source| CliError::Config { path: path.into(), source })
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag.unwrap_or_else(|| PathBuf::from(&cfg.output.dir)),
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let out = out_dir(out, &cfg);
            let run = run_single(&cfg, &out)?;
            let m = &run.metrics;
            println!(
                "{}: tv={:.6e} sse={:.6e} settling={:.4} ise={:.6e} certificate={}",
                run.label,
                m.chattering_tv_total,
                m.sse,
                m.settling_time,
                m.ise,
                if run.certificate.ok { "ok" } else { "FAILED" }
            );
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Compare { config, out, controllers } => {
            let cfg = load(&config)?;
            let modes = match controllers {
                Some(names) => names
                    .iter()
                    .map(|n| n.parse::<Mode>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|source| CliError::Config { path: config.clone(), source })?,
                None => cfg.compare.controllers.clone(),
            };
            let out = out_dir(out, &cfg);
            let report = compare_controllers(&cfg, &modes, &out)?;
            for r in &report.runs {
                println!(
                    "{:8} tv={:.6e} sse={:.6e} settling={:.4} certificate={}",
                    r.label,
                    r.metrics.chattering_tv_total,
                    r.metrics.sse,
                    r.metrics.settling_time,
                    if r.certificate.ok { "ok" } else { "FAILED" }
                );
            }
            for v in &report.verdicts {
                println!("{} ordering ({}): {:?}", v.name, v.expected, v.status);
                for p in &v.pairs {
                    println!("  {p}");
                }
            }
            println!("wrote {}", out.join("report.json").display());
            Ok(report.all_pass())
        }
        Command::CheckStability { config } => {
            let cfg = load(&config)?;
            let mut modes = vec![cfg.controller.mode];
            modes.extend(cfg.compare.controllers.iter().filter(|m| **m != cfg.controller.mode));
            modes.retain(|m| *m != Mode::Open);
            modes.sort();
            modes.dedup();
            let mut all_ok = true;
            let mut certs = serde_json::Map::new();
            for mode in modes {
                let c = certificate(&cfg, mode)?;
                all_ok &= c.ok;
                certs.insert(mode.name().into(), serde_json::to_value(&c)?);
            }
            // a closed pipe (`| head`) is not an error worth a panic
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&certs)?);
            Ok(all_ok)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
