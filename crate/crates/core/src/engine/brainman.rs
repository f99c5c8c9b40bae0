//! Collect diamonds, push the key into the door, reach the exit portal.

use super::{Action, GameState, Status, Tile};

pub(super) const DIAMOND_SCORE: f64 = 1.0;
pub(super) const UNLOCK_SCORE: f64 = 2.0;

pub(super) fn step(s: &mut GameState, action: Action) {
    let target = s.avatar.offset(action);
    match s.tile(target) {
        Tile::Wall | Tile::Door => return,
        _ => {}
    }

    if let Some(k) = s.movables.iter().position(|m| m.pos == target) {
        let beyond = target.offset(action);
        let occupied = s.movables.iter().any(|m| m.pos == beyond) || s.portals.contains(&beyond);
        match s.tile(beyond) {
            Tile::Door => {
                s.set_tile(beyond, Tile::Floor);
                s.movables.remove(k);
                s.score += UNLOCK_SCORE;
            }
            Tile::Floor if !occupied => s.movables[k].pos = beyond,
            _ => return,
        }
    }

    s.avatar = target;
    if s.tile(target) == Tile::Diamond {
        s.set_tile(target, Tile::Floor);
        s.score += DIAMOND_SCORE;
    }
    if s.portals.contains(&target) {
        s.status = Status::Win;
    }
}
