//! Race the avatar camel to the finish column ahead of scripted camels.
//!
//! The avatar moves first; reaching a finish tile wins immediately. Then
//! each NPC camel with `period` p steps right on ticks where
//! `(tick + 1) % p == 0`; any camel landing on a finish tile ends the race
//! as a loss.

use super::{Action, GameState, SpriteKind, Status, Tile};

pub(super) fn step(s: &mut GameState, action: Action) {
    s.walk(action);
    if s.tile(s.avatar) == Tile::Finish {
        s.status = Status::Win;
        return;
    }
    let next_tick = s.tick + 1;
    for camel in &mut s.npcs {
        if let SpriteKind::Camel { period } = camel.kind {
            if next_tick % u32::from(period.max(1)) == 0 && camel.pos.x + 1 < s.width {
                camel.pos.x += 1;
            }
        }
    }
    let lost = s.npcs.iter().any(|c| s.tile(c.pos) == Tile::Finish);
    if lost {
        s.status = Status::Loss;
    }
}
