//! Grid game abstraction: five bundled games, a metered forward model and
//! the state features used by tree policies.
//!
//! A [`GameState`] is an immutable snapshot. [`advance`] produces a fresh
//! successor and charges one call to the caller's [`BudgetMeter`]; the real
//! environment uses [`GameState::step`], which is identical but unmetered.
//! Game-internal randomness (alien bombs, racing camels) is drawn from the
//! stream passed in, never from global state.

mod aliens;
mod brainman;
mod camelrace;
mod level;
mod racebet;
mod zenpuzzle;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use level::{load_level, parse_level};

/// Hard cap on real game ticks; reaching it is recorded as a loss.
pub const MAX_TICKS: u32 = 2000;

/// Sentinel used for a sum of distances over an empty NPC set.
pub const SUM_INF: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("forward-model budget exhausted ({cap} calls)")]
    BudgetExhausted { cap: u32 },
    #[error("action {action} is not legal in {game}")]
    IllegalAction { action: Action, game: GameId },
    #[error("unknown game id `{0}`")]
    UnknownGame(String),
    #[error("no level {level} for game {game}")]
    MissingLevel { game: GameId, level: u32 },
    #[error("level parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Use,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "UP",
            Action::Down => "DOWN",
            Action::Left => "LEFT",
            Action::Right => "RIGHT",
            Action::Use => "USE",
        }
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Use => (0, 0),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const MOVE_ACTIONS: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
const SHOOTER_ACTIONS: [Action; 3] = [Action::Left, Action::Right, Action::Use];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameId {
    Aliens,
    Brainman,
    Camelrace,
    Racebet2,
    Zenpuzzle,
}

impl GameId {
    pub const ALL: [GameId; 5] = [
        GameId::Aliens,
        GameId::Brainman,
        GameId::Camelrace,
        GameId::Racebet2,
        GameId::Zenpuzzle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GameId::Aliens => "aliens",
            GameId::Brainman => "brainman",
            GameId::Camelrace => "camelrace",
            GameId::Racebet2 => "racebet2",
            GameId::Zenpuzzle => "zenpuzzle",
        }
    }

    /// The game's fixed action list. Indices into this list are the action
    /// indices used by every decision record.
    pub fn actions(self) -> &'static [Action] {
        match self {
            GameId::Aliens => &SHOOTER_ACTIONS,
            _ => &MOVE_ACTIONS,
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameId {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameId::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| EngineError::UnknownGame(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }

    pub fn manhattan(self, other: Pos) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    fn offset(self, action: Action) -> Pos {
        let (dx, dy) = action.delta();
        Pos::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Running,
    Win,
    Loss,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpriteKind {
    Alien,
    Bomb,
    Key,
    /// Scripted camel that steps right once every `period` ticks.
    Camel { period: u8 },
    /// Racing camel of the given colour.
    Racer { color: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sprite {
    pub pos: Pos,
    pub kind: SpriteKind,
}

impl Sprite {
    pub const fn new(pos: Pos, kind: SpriteKind) -> Self {
        Sprite { pos, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tile {
    Floor,
    Wall,
    /// Zenpuzzle tile that may be entered once.
    Special,
    SpecialUsed,
    Diamond,
    Door,
    Finish,
    /// Racebet2 betting tile for the racer of the given colour.
    Bet(u8),
}

/// Small per-game counters that do not fit the sprite lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Extras {
    /// Aliens: the avatar's missile in flight, if any.
    pub missile: Option<Pos>,
    /// Aliens: horizontal marching direction of the formation (+1 or -1).
    pub march: i32,
    /// Racebet2: per-colour probability that a racer advances on a tick.
    pub racer_speeds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub game: GameId,
    pub level: u32,
    pub tick: u32,
    pub width: i32,
    pub height: i32,
    pub avatar: Pos,
    pub npcs: Vec<Sprite>,
    pub movables: Vec<Sprite>,
    pub portals: Vec<Pos>,
    /// Row-major static layout, `width * height` cells.
    pub tiles: Vec<Tile>,
    pub score: f64,
    pub status: Status,
    pub extras: Extras,
}

impl GameState {
    /// An empty floor-only board; mostly useful for hand-built fixtures.
    pub fn blank(game: GameId, width: i32, height: i32, avatar: Pos) -> Self {
        GameState {
            game,
            level: 0,
            tick: 0,
            width,
            height,
            avatar,
            npcs: Vec::new(),
            movables: Vec::new(),
            portals: Vec::new(),
            tiles: vec![Tile::Floor; (width * height) as usize],
            score: 0.0,
            status: Status::Running,
            extras: Extras {
                march: 1,
                ..Extras::default()
            },
        }
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn tile(&self, p: Pos) -> Tile {
        if self.in_bounds(p) {
            self.tiles[(p.y * self.width + p.x) as usize]
        } else {
            Tile::Wall
        }
    }

    pub fn set_tile(&mut self, p: Pos, tile: Tile) {
        if self.in_bounds(p) {
            let w = self.width;
            self.tiles[(p.y * w + p.x) as usize] = tile;
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.status.is_terminal()
    }

    /// Legal actions in the game's fixed order; empty iff terminal.
    pub fn legal_actions(&self) -> &'static [Action] {
        if self.is_terminal() {
            &[]
        } else {
            self.game.actions()
        }
    }

    /// Unmetered successor, used by the real environment.
    pub fn step<R: Rng + ?Sized>(&self, action: Action, rng: &mut R) -> Result<GameState, EngineError> {
        if !self.legal_actions().contains(&action) {
            return Err(EngineError::IllegalAction {
                action,
                game: self.game,
            });
        }
        let mut next = self.clone();
        match self.game {
            GameId::Aliens => aliens::step(&mut next, action, rng),
            GameId::Brainman => brainman::step(&mut next, action),
            GameId::Camelrace => camelrace::step(&mut next, action),
            GameId::Racebet2 => racebet::step(&mut next, action, rng),
            GameId::Zenpuzzle => zenpuzzle::step(&mut next, action),
        }
        next.tick += 1;
        if next.status == Status::Running && next.tick >= MAX_TICKS {
            next.status = Status::Loss;
        }
        Ok(next)
    }

    /// Moves the avatar one cell unless the target is a wall or out of bounds.
    fn walk(&mut self, action: Action) -> bool {
        let target = self.avatar.offset(action);
        if self.tile(target) == Tile::Wall {
            return false;
        }
        self.avatar = target;
        true
    }

    fn d_max(&self) -> f64 {
        f64::from(self.width + self.height)
    }
}

/// Per-tick forward-model allowance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetMeter {
    used: u32,
    cap: u32,
}

impl BudgetMeter {
    pub fn new(cap: u32) -> Self {
        BudgetMeter { used: 0, cap }
    }

    pub fn used(&self) -> u32 {
        self.used
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn remaining(&self) -> u32 {
        self.cap - self.used
    }

    pub fn is_exhausted(&self) -> bool {
        self.used >= self.cap
    }

    pub fn reset(&mut self) {
        self.used = 0;
    }

    /// Records one forward-model call, refusing once the cap is reached.
    pub fn charge(&mut self) -> Result<(), EngineError> {
        if self.used >= self.cap {
            return Err(EngineError::BudgetExhausted { cap: self.cap });
        }
        self.used += 1;
        Ok(())
    }
}

/// Metered forward model: one call per successor.
pub fn advance<R: Rng + ?Sized>(
    state: &GameState,
    action: Action,
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> Result<GameState, EngineError> {
    if !state.legal_actions().contains(&action) {
        return Err(EngineError::IllegalAction {
            action,
            game: state.game,
        });
    }
    meter.charge()?;
    state.step(action, rng)
}

pub fn legal_actions(state: &GameState) -> &'static [Action] {
    state.legal_actions()
}

/// The view of a game that search agents need. [`GameState`] is the real
/// implementation; tests plug in tiny stub games.
pub trait GameModel: Clone {
    /// Legal actions in a fixed order; empty iff terminal.
    fn legal(&self) -> &[Action];
    fn advance_with<R: Rng + ?Sized>(
        &self,
        action: Action,
        meter: &mut BudgetMeter,
        rng: &mut R,
    ) -> Result<Self, EngineError>;
    fn status(&self) -> Status;
    fn score(&self) -> f64;
    fn features(&self) -> StateFeatures;

    fn is_over(&self) -> bool {
        self.status().is_terminal()
    }
}

impl GameModel for GameState {
    fn legal(&self) -> &[Action] {
        self.legal_actions()
    }

    fn advance_with<R: Rng + ?Sized>(
        &self,
        action: Action,
        meter: &mut BudgetMeter,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        advance(self, action, meter, rng)
    }

    fn status(&self) -> Status {
        self.status
    }

    fn score(&self) -> f64 {
        self.score
    }

    fn features(&self) -> StateFeatures {
        extract_features(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateFeatures {
    pub min_d_mov: f64,
    pub min_d_npc: f64,
    pub sum_d_npc: f64,
    pub n_npc: u32,
    pub min_d_portal: f64,
}

/// Manhattan-distance features relative to the avatar. Empty sets map to
/// `width + height` for minima and [`SUM_INF`] for the NPC sum.
pub fn extract_features(state: &GameState) -> StateFeatures {
    let d_max = state.d_max();
    let dist = |p: Pos| f64::from(state.avatar.manhattan(p));
    let min_of = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))));

    let min_d_mov = min_of(&mut state.movables.iter().map(|s| dist(s.pos))).unwrap_or(d_max);
    let min_d_npc = min_of(&mut state.npcs.iter().map(|s| dist(s.pos))).unwrap_or(d_max);
    let sum_d_npc = if state.npcs.is_empty() {
        SUM_INF
    } else {
        state.npcs.iter().map(|s| dist(s.pos)).sum()
    };
    let min_d_portal = min_of(&mut state.portals.iter().map(|&p| dist(p))).unwrap_or(d_max);
    StateFeatures {
        min_d_mov,
        min_d_npc,
        sum_d_npc,
        n_npc: state.npcs.len() as u32,
        min_d_portal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn features_hand_manhattan() {
        let mut s = GameState::blank(GameId::Aliens, 10, 10, Pos::new(2, 2));
        s.npcs.push(Sprite::new(Pos::new(2, 5), SpriteKind::Alien));
        s.npcs.push(Sprite::new(Pos::new(6, 2), SpriteKind::Alien));
        let f = extract_features(&s);
        assert_eq!(f.min_d_npc, 3.0);
        assert_eq!(f.sum_d_npc, 7.0);
        assert_eq!(f.n_npc, 2);
    }

    #[test]
    fn features_empty_sets_use_sentinels() {
        let s = GameState::blank(GameId::Zenpuzzle, 7, 5, Pos::new(1, 1));
        let f = extract_features(&s);
        assert_eq!(f.min_d_npc, 12.0);
        assert_eq!(f.min_d_mov, 12.0);
        assert_eq!(f.min_d_portal, 12.0);
        assert_eq!(f.sum_d_npc, SUM_INF);
        assert_eq!(f.n_npc, 0);
    }

    #[test]
    fn npc_on_avatar_is_zero_distance() {
        let mut s = GameState::blank(GameId::Aliens, 5, 5, Pos::new(1, 1));
        s.npcs.push(Sprite::new(Pos::new(1, 1), SpriteKind::Alien));
        assert_eq!(extract_features(&s).min_d_npc, 0.0);
    }

    #[test]
    fn meter_refuses_past_cap() {
        let s = load_level(GameId::Zenpuzzle, 0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut meter = BudgetMeter::new(2);
        advance(&s, Action::Up, &mut meter, &mut rng).unwrap();
        advance(&s, Action::Up, &mut meter, &mut rng).unwrap();
        let err = advance(&s, Action::Up, &mut meter, &mut rng).unwrap_err();
        assert_eq!(err, EngineError::BudgetExhausted { cap: 2 });
        assert_eq!(meter.used(), 2);
    }

    #[test]
    fn illegal_action_is_rejected_without_charge() {
        let s = load_level(GameId::Zenpuzzle, 0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut meter = BudgetMeter::new(5);
        let err = advance(&s, Action::Use, &mut meter, &mut rng).unwrap_err();
        assert!(matches!(err, EngineError::IllegalAction { .. }));
        assert_eq!(meter.used(), 0);
    }

    #[test]
    fn action_sets_per_game() {
        for g in GameId::ALL {
            let s = load_level(g, 0, 3).unwrap();
            let expect = if g == GameId::Aliens { 3 } else { 4 };
            assert_eq!(s.legal_actions().len(), expect, "{g}");
        }
        let s = load_level(GameId::Aliens, 0, 0).unwrap();
        assert_eq!(s.legal_actions(), &[Action::Left, Action::Right, Action::Use]);
        let z = load_level(GameId::Zenpuzzle, 0, 0).unwrap();
        assert_eq!(z.legal_actions(), &[Action::Up, Action::Down, Action::Left, Action::Right]);
    }

    #[test]
    fn terminal_state_has_no_actions() {
        let mut s = load_level(GameId::Camelrace, 0, 0).unwrap();
        s.status = Status::Win;
        assert!(legal_actions(&s).is_empty());
    }

    #[test]
    fn game_ids_parse() {
        assert_eq!("racebet2".parse::<GameId>().unwrap(), GameId::Racebet2);
        assert_eq!(
            "pacman".parse::<GameId>().unwrap_err(),
            EngineError::UnknownGame("pacman".into())
        );
    }

    #[test]
    fn tick_cap_records_loss() {
        let mut s = load_level(GameId::Zenpuzzle, 0, 0).unwrap();
        s.tick = MAX_TICKS - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = s.step(Action::Up, &mut rng).unwrap();
        assert_eq!(next.tick, MAX_TICKS);
        assert_eq!(next.status, Status::Loss);
    }
}
