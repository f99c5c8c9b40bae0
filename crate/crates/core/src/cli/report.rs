//! `report`: comparison matrices, verdicts and conv series from a log
//! directory. A pure function of the directory contents.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::Manifest;
use super::CliError;
use crate::analysis::{
    build_matrix_for, conv_series_by_agent, conv_series_csv, infer_roster, ComparisonMatrix, PairVerdict,
    Thresholds, MATRIX_STATS,
};
use crate::engine::GameId;
use crate::shadowing::PlaythroughLog;

pub const BUNDLE: &str = "report.json";
pub const VERDICTS: &str = "verdicts.json";
pub const CONV_DIR: &str = "conv";

#[derive(Debug, Serialize)]
struct GameReport<'a> {
    matrix: &'a ComparisonMatrix,
    verdicts: &'a [PairVerdict],
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

fn scan(dir: &Path, recurse: bool, logs: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            if recurse {
                scan(&path, false, logs)?;
            }
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            logs.push(path);
        }
    }
    Ok(())
}

/// All `*.jsonl` files in `dir` and its immediate subdirectories, sorted.
fn find_logs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    scan(dir, true, &mut out)?;
    out.sort();
    Ok(out)
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Reads every log under `log_dir` and writes the report to `out`.
/// Returns the matrices, one per game, in game order.
pub fn cmd_report(log_dir: &Path, out: &Path, th: &Thresholds) -> Result<Vec<ComparisonMatrix>, CliError> {
    if !log_dir.is_dir() {
        return Err(CliError::Report(format!("{} is not a directory", log_dir.display())));
    }
    let paths = find_logs(log_dir)?;
    if paths.is_empty() {
        return Err(CliError::Report(format!("no playthrough logs in {}", log_dir.display())));
    }
    let manifest = Manifest::read(log_dir)?;
    let mut by_game: BTreeMap<GameId, Vec<PlaythroughLog>> = BTreeMap::new();
    for p in &paths {
        let log = PlaythroughLog::read_jsonl(p)?;
        by_game.entry(log.header.game).or_default().push(log);
    }

    let mut matrices = Vec::new();
    let mut bundle = BTreeMap::new();
    let mut verdict_sets = Vec::new();
    for (game, logs) in &by_game {
        let roster: Vec<String> = match &manifest {
            Some(m) => m.roster.iter().map(|a| a.label.clone()).collect(),
            None => infer_roster(logs),
        };
        let matrix = build_matrix_for(logs, *game, &roster)?;
        verdict_sets.push(matrix.verdicts(th));
        matrices.push(matrix);
    }

    fs::create_dir_all(out).map_err(io_err(out))?;
    for ((game, logs), (matrix, verdicts)) in by_game.iter().zip(matrices.iter().zip(&verdict_sets)) {
        let dir = out.join(game.name());
        let conv_dir = dir.join(CONV_DIR);
        fs::create_dir_all(&conv_dir).map_err(io_err(&conv_dir))?;
        for stat in MATRIX_STATS {
            write(&dir.join(format!("{stat}.csv")), &matrix.to_csv(stat))?;
        }
        let mut text = serde_json::to_string_pretty(verdicts).expect("verdicts serialize");
        text.push('\n');
        write(&dir.join(VERDICTS), &text)?;
        for (label, series) in conv_series_by_agent(logs) {
            write(&conv_dir.join(format!("{}.csv", file_label(&label))), &conv_series_csv(&series))?;
        }
        bundle.insert(game.name(), GameReport { matrix, verdicts });
    }
    let mut text = serde_json::to_string_pretty(&bundle).expect("report serializes");
    text.push('\n');
    write(&out.join(BUNDLE), &text)?;
    Ok(matrices)
}
