//! Paired main/shadow playthroughs.
//!
//! Each tick the main and shadow agents see the same state, each with a
//! fresh meter and its own random stream. Only the main agent's choice is
//! played. Logs are JSON lines: a header, one record per tick, an outcome.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentConfig, AgentError, Decision};
use crate::engine::{load_level, Action, BudgetMeter, EngineError, GameId, GameState, Status};

const ENV_STREAM: u64 = 0;
const MAIN_STREAM: u64 = 1;
const SHADOW_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Main,
    Shadow,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Main => "main",
            Role::Shadow => "shadow",
        })
    }
}

#[derive(Debug, Error)]
pub enum ShadowError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{role} agent `{label}` failed at tick {tick}: {source}")]
    Agent {
        role: Role,
        label: String,
        tick: u32,
        source: AgentError,
    },
    #[error("{role} agent `{label}` emitted an invalid decision at tick {tick}: {message}")]
    InvalidDecision {
        role: Role,
        label: String,
        tick: u32,
        message: String,
    },
    #[error("budget cap {cap} is below the {needed} calls `{label}` needs per tick")]
    CapTooSmall { label: String, cap: u32, needed: u32 },
    #[error("playthrough {index} of {main} vs {shadow} (seed {seed}) failed: {source}")]
    Playthrough {
        main: String,
        shadow: String,
        index: u32,
        seed: u64,
        source: Box<ShadowError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickLog {
    pub tick: u32,
    pub legal: Vec<Action>,
    pub main: Decision,
    pub shadow: Decision,
    pub played: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub win: bool,
    pub score: f64,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub game: GameId,
    pub level: u32,
    pub seed: u64,
    pub cap: u32,
    pub main: AgentConfig,
    pub shadow: AgentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaythroughLog {
    pub header: LogHeader,
    pub ticks: Vec<TickLog>,
    pub outcome: Outcome,
}

/// One line of a log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogRecord {
    Header(LogHeader),
    Tick(TickLog),
    Outcome(Outcome),
}

/// Everything in a playthrough that depends only on the main agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTrace {
    pub ticks: Vec<MainTick>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTick {
    pub tick: u32,
    pub legal: Vec<Action>,
    pub main: Decision,
    pub played: Action,
}

impl PlaythroughLog {
    pub fn main_trace(&self) -> MainTrace {
        MainTrace {
            ticks: self
                .ticks
                .iter()
                .map(|t| MainTick {
                    tick: t.tick,
                    legal: t.legal.clone(),
                    main: t.main.clone(),
                    played: t.played,
                })
                .collect(),
            outcome: self.outcome,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: LogRecord| {
            out.push_str(&serde_json::to_string(&r).expect("log records always serialize"));
            out.push('\n');
        };
        push(LogRecord::Header(self.header.clone()));
        for t in &self.ticks {
            push(LogRecord::Tick(t.clone()));
        }
        push(LogRecord::Outcome(self.outcome));
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), ShadowError> {
        let io = |source| ShadowError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
        w.write_all(self.to_jsonl().as_bytes()).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, ShadowError> {
        let file = fs::File::open(path).map_err(|source| ShadowError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let fmt_err = |line: usize, message: String| ShadowError::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut header = None;
        let mut ticks = Vec::new();
        let mut outcome = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|source| ShadowError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_str(&line).map_err(|e| fmt_err(n, e.to_string()))?;
            match record {
                LogRecord::Header(h) if header.is_none() && n == 1 => header = Some(h),
                LogRecord::Header(_) => return Err(fmt_err(n, "header must be the first line only".into())),
                LogRecord::Tick(_) | LogRecord::Outcome(_) if header.is_none() => {
                    return Err(fmt_err(n, "missing header".into()))
                }
                _ if outcome.is_some() => return Err(fmt_err(n, "record after outcome".into())),
                LogRecord::Tick(t) => ticks.push(t),
                LogRecord::Outcome(o) => outcome = Some(o),
            }
        }
        let header = header.ok_or_else(|| fmt_err(1, "empty log".into()))?;
        let outcome = outcome.ok_or_else(|| fmt_err(ticks.len() + 2, "missing outcome record".into()))?;
        if outcome.length as usize != ticks.len() {
            return Err(fmt_err(
                ticks.len() + 2,
                format!("outcome length {} but {} tick records", outcome.length, ticks.len()),
            ));
        }
        Ok(PlaythroughLog {
            header,
            ticks,
            outcome,
        })
    }
}

/// Independent random streams for one playthrough.
pub struct Streams {
    pub env: ChaCha8Rng,
    pub main: ChaCha8Rng,
    pub shadow: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Streams {
            env: stream(ENV_STREAM),
            main: stream(MAIN_STREAM),
            shadow: stream(SHADOW_STREAM),
        }
    }
}

/// SplitMix64 finaliser, used to spread structured seed inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of playthrough `index` for the ordered roster pair (`main`, `shadow`).
pub fn playthrough_seed(base_seed: u64, main: usize, shadow: usize, index: u32) -> u64 {
    [main as u64, shadow as u64, u64::from(index)]
        .into_iter()
        .fold(mix(base_seed), |acc, x| mix(acc ^ x))
}

fn checked_decide(
    agent: &Agent,
    config: &AgentConfig,
    role: Role,
    state: &GameState,
    cap: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Decision, ShadowError> {
    let mut meter = BudgetMeter::new(cap);
    let d = agent
        .decide(state, &mut meter, rng)
        .map_err(|source| ShadowError::Agent {
            role,
            label: config.label.clone(),
            tick: state.tick,
            source,
        })?;
    let invalid = |message: String| ShadowError::InvalidDecision {
        role,
        label: config.label.clone(),
        tick: state.tick,
        message,
    };
    if d.calls != meter.used() {
        return Err(invalid(format!("reported {} calls, meter saw {}", d.calls, meter.used())));
    }
    d.validate(cap).map_err(invalid)?;
    if d.p.len() != state.legal_actions().len() {
        return Err(invalid(format!("{} probabilities for {} actions", d.p.len(), state.legal_actions().len())));
    }
    Ok(d)
}

fn check_cap(config: &AgentConfig, game: GameId, cap: u32) -> Result<(), ShadowError> {
    let needed = config.min_budget(game.actions().len()).max(1);
    if cap < needed {
        return Err(ShadowError::CapTooSmall {
            label: config.label.clone(),
            cap,
            needed,
        });
    }
    Ok(())
}

fn build(config: &AgentConfig, role: Role) -> Result<Agent, ShadowError> {
    config.build().map_err(|source| ShadowError::Agent {
        role,
        label: config.label.clone(),
        tick: 0,
        source,
    })
}

pub fn run_playthrough(
    game: GameId,
    level: u32,
    main: &AgentConfig,
    shadow: &AgentConfig,
    cap: u32,
    seed: u64,
) -> Result<PlaythroughLog, ShadowError> {
    run_playthrough_observed(game, level, main, shadow, cap, seed, &mut |_| {})
}

/// As [`run_playthrough`], calling `observe` on every state the
/// environment passes through, the initial and final states included.
pub fn run_playthrough_observed(
    game: GameId,
    level: u32,
    main: &AgentConfig,
    shadow: &AgentConfig,
    cap: u32,
    seed: u64,
    observe: &mut dyn FnMut(&GameState),
) -> Result<PlaythroughLog, ShadowError> {
    check_cap(main, game, cap)?;
    check_cap(shadow, game, cap)?;
    let main_agent = build(main, Role::Main)?;
    let shadow_agent = build(shadow, Role::Shadow)?;
    let mut streams = Streams::new(seed);
    let mut state = load_level(game, level, seed)?;
    observe(&state);
    let mut ticks = Vec::new();

    while !state.is_terminal() {
        let legal = state.legal_actions();
        let m = checked_decide(&main_agent, main, Role::Main, &state, cap, &mut streams.main)?;
        let s = checked_decide(&shadow_agent, shadow, Role::Shadow, &state, cap, &mut streams.shadow)?;
        let played = legal[m.a_star];
        ticks.push(TickLog {
            tick: state.tick,
            legal: legal.to_vec(),
            main: m,
            shadow: s,
            played,
        });
        state = state.step(played, &mut streams.env)?;
        observe(&state);
    }

    Ok(PlaythroughLog {
        header: LogHeader {
            game,
            level,
            seed,
            cap,
            main: main.clone(),
            shadow: shadow.clone(),
        },
        outcome: Outcome {
            win: state.status == Status::Win,
            score: state.score,
            length: ticks.len() as u32,
        },
        ticks,
    })
}

/// Re-runs a logged playthrough with the shadow agent removed.
pub fn replay_main_only(
    header: &LogHeader,
    observe: &mut dyn FnMut(&GameState),
) -> Result<MainTrace, ShadowError> {
    check_cap(&header.main, header.game, header.cap)?;
    let agent = build(&header.main, Role::Main)?;
    let mut streams = Streams::new(header.seed);
    let mut state = load_level(header.game, header.level, header.seed)?;
    observe(&state);
    let mut ticks = Vec::new();
    while !state.is_terminal() {
        let legal = state.legal_actions();
        let m = checked_decide(&agent, &header.main, Role::Main, &state, header.cap, &mut streams.main)?;
        let played = legal[m.a_star];
        ticks.push(MainTick {
            tick: state.tick,
            legal: legal.to_vec(),
            main: m,
            played,
        });
        state = state.step(played, &mut streams.env)?;
        observe(&state);
    }
    Ok(MainTrace {
        outcome: Outcome {
            win: state.status == Status::Win,
            score: state.score,
            length: ticks.len() as u32,
        },
        ticks,
    })
}

/// One cell of an experiment: roster indices of the pair and the
/// playthrough index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunKey {
    pub main: usize,
    pub shadow: usize,
    pub index: u32,
}

pub fn experiment_keys(roster_len: usize, n_playthroughs: u32) -> Vec<RunKey> {
    let mut keys = Vec::with_capacity(roster_len * roster_len * n_playthroughs as usize);
    for main in 0..roster_len {
        for shadow in 0..roster_len {
            for index in 0..n_playthroughs {
                keys.push(RunKey { main, shadow, index });
            }
        }
    }
    keys
}

/// Runs every ordered roster pair `n_playthroughs` times. Work is spread
/// over the current rayon pool; the result order is fixed (main-major,
/// then shadow, then index) regardless of scheduling.
pub fn run_experiment(
    game: GameId,
    level: u32,
    roster: &[AgentConfig],
    cap: u32,
    n_playthroughs: u32,
    base_seed: u64,
) -> Result<Vec<PlaythroughLog>, ShadowError> {
    experiment_keys(roster.len(), n_playthroughs)
        .into_par_iter()
        .map(|k| run_cell(game, level, roster, cap, base_seed, k))
        .collect()
}

pub fn run_cell(
    game: GameId,
    level: u32,
    roster: &[AgentConfig],
    cap: u32,
    base_seed: u64,
    key: RunKey,
) -> Result<PlaythroughLog, ShadowError> {
    let seed = playthrough_seed(base_seed, key.main, key.shadow, key.index);
    let (m, s) = (&roster[key.main], &roster[key.shadow]);
    run_playthrough(game, level, m, s, cap, seed).map_err(|e| ShadowError::Playthrough {
        main: m.label.clone(),
        shadow: s.label.clone(),
        index: key.index,
        seed,
        source: Box::new(e),
    })
}
