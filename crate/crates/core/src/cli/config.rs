//! Experiment configuration: built-in profiles overlaid with a TOML file
//! and command-line overrides. The file grammar is in `docs/config.md`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::agents::{AgentConfig, AgentKind};
use crate::engine::GameId;
use crate::policy_expr::PolicyExpr;

pub const DEFAULT_CAP: u32 = 700;
pub const DEFAULT_PLAYTHROUGHS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub games: Vec<GameId>,
    /// Level per game; games not listed play level 0.
    pub levels: BTreeMap<GameId, u32>,
    pub roster: Vec<AgentConfig>,
    pub budget_cap: u32,
    pub playthroughs: u32,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

/// The file form: every field optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    profile: Option<String>,
    games: Option<Vec<String>>,
    levels: Option<BTreeMap<String, u32>>,
    roster: Option<Vec<AgentConfig>>,
    budget_cap: Option<u32>,
    playthroughs: Option<u32>,
    base_seed: Option<u64>,
    output_dir: Option<PathBuf>,
}

/// The 18-agent roster: MCTS with each pruning of the reference policy
/// (labels `0`..`14`), then OSLA `15`, Random `16` and MCS `17`.
pub fn table_roster() -> Vec<AgentConfig> {
    let mut roster: Vec<AgentConfig> = PolicyExpr::reference()
        .prunings()
        .iter()
        .enumerate()
        .map(|(i, p)| AgentConfig::mcts(i.to_string(), p.canonical()))
        .collect();
    roster.push(AgentConfig::simple("15", AgentKind::Osla));
    roster.push(AgentConfig::simple("16", AgentKind::Random));
    roster.push(AgentConfig::simple("17", AgentKind::Mcs));
    roster
}

pub fn ucb_agent() -> AgentConfig {
    AgentConfig::ucb("ucb", crate::agents::DEFAULT_UCB_ALPHA)
}

pub const PROFILES: [&str; 2] = ["full", "desk"];

pub fn profile(name: &str) -> Result<ExperimentConfig, CliError> {
    let full = table_roster();
    match name {
        "full" => Ok(ExperimentConfig {
            games: GameId::ALL.to_vec(),
            levels: BTreeMap::new(),
            roster: full,
            budget_cap: DEFAULT_CAP,
            playthroughs: DEFAULT_PLAYTHROUGHS,
            base_seed: 0,
            output_dir: PathBuf::from("runs/full"),
        }),
        "desk" => {
            let pick = |label: &str| full.iter().find(|a| a.label == label).cloned().expect("label in table roster");
            let mut roster: Vec<AgentConfig> = ["0", "12", "15", "16", "17"].into_iter().map(pick).collect();
            roster.push(ucb_agent());
            Ok(ExperimentConfig {
                games: vec![GameId::Aliens, GameId::Racebet2],
                levels: BTreeMap::new(),
                roster,
                budget_cap: DEFAULT_CAP,
                playthroughs: 10,
                base_seed: 0,
                output_dir: PathBuf::from("runs/desk"),
            })
        }
        other => Err(CliError::Config(format!(
            "unknown profile `{other}` (expected one of {})",
            PROFILES.join(", ")
        ))),
    }
}

/// Command-line overrides, applied last.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn parse_game(name: &str) -> Result<GameId, CliError> {
    name.parse::<GameId>().map_err(|e| CliError::Config(e.to_string()))
}

/// Parses file text over the profile it names (or `--profile`, or the
/// full profile).
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    apply(file, overrides)
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_config(&text, overrides).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
        None => apply(ConfigFile::default(), overrides),
    }
}

fn apply(file: ConfigFile, o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let name = o.profile.as_deref().or(file.profile.as_deref()).unwrap_or("full");
    let mut cfg = profile(name)?;
    if let Some(games) = file.games {
        cfg.games = games.iter().map(|g| parse_game(g)).collect::<Result<_, _>>()?;
    }
    if let Some(levels) = file.levels {
        cfg.levels = levels
            .iter()
            .map(|(g, &l)| Ok((parse_game(g)?, l)))
            .collect::<Result<_, CliError>>()?;
    }
    if let Some(roster) = file.roster {
        cfg.roster = roster;
    }
    cfg.budget_cap = file.budget_cap.unwrap_or(cfg.budget_cap);
    cfg.playthroughs = file.playthroughs.unwrap_or(cfg.playthroughs);
    cfg.base_seed = o.seed.or(file.base_seed).unwrap_or(cfg.base_seed);
    if let Some(out) = o.out.clone().or(file.output_dir) {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn label_ok(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !label.starts_with('.')
}

impl ExperimentConfig {
    pub fn level(&self, game: GameId) -> u32 {
        self.levels.get(&game).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.budget_cap < 1 {
            return bad("budget_cap must be at least 1".into());
        }
        if self.games.is_empty() {
            return bad("no games configured".into());
        }
        if self.roster.is_empty() {
            return bad("roster is empty".into());
        }
        let mut seen = HashSet::new();
        for a in &self.roster {
            if !label_ok(&a.label) {
                return bad(format!(
                    "agent label `{}` must be non-empty and use only letters, digits, `-`, `_` or `.`",
                    a.label
                ));
            }
            if !seen.insert(a.label.as_str()) {
                return bad(format!("duplicate agent label `{}`", a.label));
            }
            a.build().map_err(|e| CliError::Config(e.to_string()))?;
        }
        for &g in &self.games {
            crate::engine::load_level(g, self.level(g), self.base_seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            for a in &self.roster {
                let needed = a.min_budget(g.actions().len());
                if self.budget_cap < needed {
                    return bad(format!(
                        "budget_cap {} is below the {needed} calls `{}` needs on {g}",
                        self.budget_cap, a.label
                    ));
                }
            }
        }
        Ok(())
    }
}
