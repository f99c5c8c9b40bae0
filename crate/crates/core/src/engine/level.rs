//! ASCII level files.
//!
//! First line `W H`, then `H` rows of exactly `W` characters. Shared legend:
//! `A` avatar, `n` NPC, `m` movable, `p` portal, `#` wall, `.` floor. Each
//! game accepts a few extra characters, listed in `docs/games.md`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EngineError, Extras, GameId, GameState, Pos, Sprite, SpriteKind, Status, Tile};

const RACER_SPEED_MIN: f64 = 0.75;
const RACER_SPEED_SPAN: f64 = 0.15;

fn bundled(game: GameId, level: u32) -> Option<&'static str> {
    match (game, level) {
        (GameId::Aliens, 0) => Some(include_str!("../../levels/aliens_0.txt")),
        (GameId::Brainman, 0) => Some(include_str!("../../levels/brainman_0.txt")),
        (GameId::Camelrace, 0) => Some(include_str!("../../levels/camelrace_0.txt")),
        (GameId::Racebet2, 0) => Some(include_str!("../../levels/racebet2_0.txt")),
        (GameId::Zenpuzzle, 0) => Some(include_str!("../../levels/zenpuzzle_0.txt")),
        _ => None,
    }
}

/// Loads a bundled level. The seed only matters for games whose initial
/// state is randomised (racer speeds in racebet2).
pub fn load_level(game: GameId, level: u32, seed: u64) -> Result<GameState, EngineError> {
    let text = bundled(game, level).ok_or(EngineError::MissingLevel { game, level })?;
    let mut state = parse_level(game, level, text)?;
    if game == GameId::Racebet2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let colors = state
            .npcs
            .iter()
            .filter_map(|s| match s.kind {
                SpriteKind::Racer { color } => Some(usize::from(color) + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        state.extras.racer_speeds = (0..colors)
            .map(|_| RACER_SPEED_MIN + RACER_SPEED_SPAN * rng.gen::<f64>())
            .collect();
    }
    Ok(state)
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> EngineError {
    EngineError::Parse {
        line,
        column,
        message: message.into(),
    }
}

pub fn parse_level(game: GameId, level: u32, text: &str) -> Result<GameState, EngineError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, 1, "empty level file"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |i: usize| -> Result<i32, EngineError> {
        dims.get(i)
            .and_then(|d| d.parse::<i32>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| parse_err(1, 1, "header must be `W H` with positive integers"))
    };
    if dims.len() != 2 {
        return Err(parse_err(1, 1, "header must be `W H` with positive integers"));
    }
    let (width, height) = (parse_dim(0)?, parse_dim(1)?);

    let mut state = GameState::blank(game, width, height, Pos::new(0, 0));
    state.level = level;
    let mut avatar = None;

    for y in 0..height {
        let line_no = y as usize + 2;
        let row = lines
            .next()
            .ok_or_else(|| parse_err(line_no, 1, format!("expected {height} rows, found {y}")))?;
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != width as usize {
            return Err(parse_err(
                line_no,
                chars.len().min(width as usize) + 1,
                format!("row has {} cells, expected {width}", chars.len()),
            ));
        }
        for (x, &c) in chars.iter().enumerate() {
            let pos = Pos::new(x as i32, y);
            let col = x + 1;
            let tile = match c {
                '.' => Tile::Floor,
                '#' => Tile::Wall,
                'A' => {
                    if avatar.replace(pos).is_some() {
                        return Err(parse_err(line_no, col, "second avatar"));
                    }
                    Tile::Floor
                }
                'p' => {
                    state.portals.push(pos);
                    Tile::Floor
                }
                _ => match cell_extra(game, c, pos, &mut state) {
                    Some(t) => t,
                    None => {
                        return Err(parse_err(line_no, col, format!("unexpected `{c}` in {game} level")))
                    }
                },
            };
            state.set_tile(pos, tile);
        }
    }
    if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
        return Err(parse_err(height as usize + 2, 1, format!("trailing content `{extra}`")));
    }
    state.avatar = avatar.ok_or_else(|| parse_err(2, 1, "level has no avatar `A`"))?;
    state.status = Status::Running;
    state.extras = Extras {
        march: 1,
        ..state.extras
    };
    Ok(state)
}

/// Game-specific legend. Returns the tile under the character, registering
/// any sprite it denotes.
fn cell_extra(game: GameId, c: char, pos: Pos, s: &mut GameState) -> Option<Tile> {
    match (game, c) {
        (GameId::Aliens, 'n') => s.npcs.push(Sprite::new(pos, SpriteKind::Alien)),
        (GameId::Aliens, 'm') => s.movables.push(Sprite::new(pos, SpriteKind::Bomb)),
        (GameId::Brainman, 'm') => s.movables.push(Sprite::new(pos, SpriteKind::Key)),
        (GameId::Brainman, 'd') => return Some(Tile::Diamond),
        (GameId::Brainman, 'D') => return Some(Tile::Door),
        (GameId::Camelrace, 'n') => s.npcs.push(Sprite::new(pos, SpriteKind::Camel { period: 1 })),
        (GameId::Camelrace, '2'..='9') => s.npcs.push(Sprite::new(
            pos,
            SpriteKind::Camel {
                period: c.to_digit(10)? as u8,
            },
        )),
        (GameId::Camelrace, 'F') => {
            // the finish line is the goal sprite
            s.portals.push(pos);
            return Some(Tile::Finish);
        }
        (GameId::Racebet2, 'F') => return Some(Tile::Finish),
        (GameId::Racebet2, '0'..='3') => s.npcs.push(Sprite::new(
            pos,
            SpriteKind::Racer {
                color: c.to_digit(10)? as u8,
            },
        )),
        (GameId::Racebet2, 'a'..='d') => return Some(Tile::Bet(c as u8 - b'a')),
        (GameId::Zenpuzzle, 's') => return Some(Tile::Special),
        _ => return None,
    }
    Some(Tile::Floor)
}
