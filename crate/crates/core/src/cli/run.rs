//! `run`: play every configured pairing and write logs plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::CliError;
use crate::agents::AgentConfig;
use crate::engine::GameId;
use crate::shadowing::{experiment_keys, run_cell, RunKey};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameEntry {
    pub game: GameId,
    pub level: u32,
    /// Log paths relative to the output directory, in run order.
    pub logs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub budget_cap: u32,
    pub playthroughs: u32,
    pub base_seed: u64,
    pub roster: Vec<AgentConfig>,
    pub games: Vec<GameEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Option<Manifest>, CliError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn log_name(roster: &[AgentConfig], key: RunKey) -> String {
    format!(
        "{}__{}__{:03}.jsonl",
        roster[key.main].label, roster[key.shadow].label, key.index
    )
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the experiment on a pool of `jobs` threads (0 = one per core).
/// The files written do not depend on `jobs`.
pub fn cmd_run(cfg: &ExperimentConfig, jobs: usize) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let out = &cfg.output_dir;
    create_dir(out)?;

    let mut games = Vec::with_capacity(cfg.games.len());
    for &game in &cfg.games {
        let level = cfg.level(game);
        let dir = out.join(game.name());
        create_dir(&dir)?;
        let keys = experiment_keys(cfg.roster.len(), cfg.playthroughs);
        let names: Vec<String> = pool.install(|| {
            keys.par_iter()
                .map(|&key| {
                    let log = run_cell(game, level, &cfg.roster, cfg.budget_cap, cfg.base_seed, key)?;
                    let name = log_name(&cfg.roster, key);
                    log.write_jsonl(&dir.join(&name))?;
                    Ok::<_, CliError>(format!("{}/{name}", game.name()))
                })
                .collect::<Result<_, _>>()
        })?;
        games.push(GameEntry {
            game,
            level,
            logs: names,
        });
    }

    let manifest = Manifest {
        budget_cap: cfg.budget_cap,
        playthroughs: cfg.playthroughs,
        base_seed: cfg.base_seed,
        roster: cfg.roster.clone(),
        games,
    };
    let path: PathBuf = out.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    Ok(manifest)
}
