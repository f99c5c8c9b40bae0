//! Step on every special tile; each may be entered only once.
//!
//! Entering a special tile scores a point and marks it used. Used tiles
//! block like walls. Covering every special tile wins; an avatar with no
//! enterable neighbour loses.

use super::{Action, GameState, Status, Tile, MOVE_ACTIONS};

pub(super) const TILE_SCORE: f64 = 1.0;

fn enterable(t: Tile) -> bool {
    !matches!(t, Tile::Wall | Tile::SpecialUsed)
}

pub(super) fn step(s: &mut GameState, action: Action) {
    let target = s.avatar.offset(action);
    let t = s.tile(target);
    if enterable(t) {
        s.avatar = target;
        if t == Tile::Special {
            s.set_tile(target, Tile::SpecialUsed);
            s.score += TILE_SCORE;
        }
    }
    if !s.tiles.contains(&Tile::Special) {
        s.status = Status::Win;
    } else if !MOVE_ACTIONS
        .iter()
        .any(|&a| enterable(s.tile(s.avatar.offset(a))))
    {
        s.status = Status::Loss;
    }
}
