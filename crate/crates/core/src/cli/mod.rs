//! Command-line front end: `run`, `report`, `plot`, `policies`.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{AnalysisError, Thresholds};
use crate::policy_expr::{PolicyExpr, PolicyParseError};
use crate::shadowing::ShadowError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Run(#[from] ShadowError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("report error: {0}")]
    Report(String),
    #[error("plot error: {0}")]
    Plot(String),
    #[error(transparent)]
    Policy(#[from] PolicyParseError),
}

#[derive(Debug, Parser)]
#[command(name = "shadowbench", version, about = "Main/shadow agent comparison on grid games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play every roster pairing and write JSONL logs plus a manifest.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base profile: `full` (18 agents, 5 games, 20 playthroughs) or `desk`.
        #[arg(long)]
        profile: Option<String>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build comparison matrices, verdicts and conv series from logs.
    Report {
        log_dir: PathBuf,
        /// Defaults to `<log_dir>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = Thresholds::default().ap)]
        ap_threshold: f64,
        #[arg(long, default_value_t = Thresholds::default().ds)]
        ds_threshold: f64,
    },
    /// Render report CSVs as SVG heatmaps and line charts.
    Plot { report_dir: PathBuf },
    /// List every pruning of a policy, numbered as in the agent roster.
    Policies {
        /// Policy to prune instead of the reference heuristic.
        #[arg(long)]
        expr: Option<String>,
    },
}

/// `id<TAB>canonical` lines for every pruning of `expr`.
pub fn cmd_policies(expr: Option<&str>) -> Result<Vec<String>, CliError> {
    let root = match expr {
        Some(text) => PolicyExpr::parse(text)?,
        None => PolicyExpr::reference(),
    };
    Ok(root
        .prunings()
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{i}\t{p}"))
        .collect())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            profile,
            jobs,
            seed,
            out,
        } => {
            let overrides = config::Overrides { profile, seed, out };
            let cfg = config::load_config(config.as_deref(), &overrides)?;
            let m = run::cmd_run(&cfg, jobs)?;
            let n: usize = m.games.iter().map(|g| g.logs.len()).sum();
            println!("wrote {n} logs to {}", cfg.output_dir.display());
        }
        Command::Report {
            log_dir,
            out,
            ap_threshold,
            ds_threshold,
        } => {
            let th = Thresholds {
                ap: ap_threshold,
                ds: ds_threshold,
                ..Thresholds::default()
            };
            let out = out.unwrap_or_else(|| log_dir.join("report"));
            let ms = report::cmd_report(&log_dir, &out, &th)?;
            for m in &ms {
                println!("{}: {}x{} matrix", m.game, m.size(), m.size());
            }
            println!("report written to {}", out.display());
        }
        Command::Plot { report_dir } => {
            let files = plot::cmd_plot(&report_dir)?;
            println!("wrote {} SVG files", files.len());
        }
        Command::Policies { expr } => {
            let mut stdout = std::io::stdout().lock();
            for line in cmd_policies(expr.as_deref())? {
                let _ = writeln!(stdout, "{line}");
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
