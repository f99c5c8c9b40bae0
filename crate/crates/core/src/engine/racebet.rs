//! Bet on a camel race by standing on a colour tile when the race ends.
//!
//! The avatar is confined to a small cross of floor cells whose arm ends
//! are betting tiles. Each tick every racer advances one cell with its own
//! probability. When at least one racer stands on a finish tile the race
//! is over: the winner is the lowest colour among the racers that finished,
//! and the avatar wins only if it stands on that colour's betting tile.

use rand::Rng;

use super::{Action, GameState, SpriteKind, Status, Tile};

pub(super) const WIN_SCORE: f64 = 1.0;

pub(super) fn step<R: Rng + ?Sized>(s: &mut GameState, action: Action, rng: &mut R) {
    s.walk(action);

    for i in 0..s.npcs.len() {
        let SpriteKind::Racer { color } = s.npcs[i].kind else {
            continue;
        };
        let speed = s.extras.racer_speeds.get(usize::from(color)).copied().unwrap_or(0.5);
        if rng.gen_bool(speed.clamp(0.0, 1.0)) {
            let mut next = s.npcs[i].pos;
            next.x += 1;
            if s.tile(next) != Tile::Wall {
                s.npcs[i].pos = next;
            }
        }
    }

    let winner = s
        .npcs
        .iter()
        .filter(|r| s.tile(r.pos) == Tile::Finish)
        .filter_map(|r| match r.kind {
            SpriteKind::Racer { color } => Some(color),
            _ => None,
        })
        .min();
    if let Some(color) = winner {
        if s.tile(s.avatar) == Tile::Bet(color) {
            s.status = Status::Win;
            s.score += WIN_SCORE;
        } else {
            s.status = Status::Loss;
        }
    }
}
