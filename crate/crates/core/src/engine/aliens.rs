//! Bottom-row shooter against a marching, bomb-dropping formation.
//!
//! Order of a tick: avatar moves or fires, the missile climbs one cell,
//! bombs fall one cell, the formation marches (every `MARCH_PERIOD` ticks),
//! then every alien may drop a bomb. Losing (bomb on the avatar, or an
//! alien reaching the avatar row) is checked before winning.

use rand::Rng;

use super::{Action, GameState, Pos, Sprite, SpriteKind, Status};

pub(super) const MARCH_PERIOD: u32 = 3;
pub(super) const BOMB_PROB: f64 = 0.015;
pub(super) const KILL_SCORE: f64 = 1.0;

pub(super) fn step<R: Rng + ?Sized>(s: &mut GameState, action: Action, rng: &mut R) {
    match action {
        Action::Left | Action::Right => {
            s.walk(action);
        }
        Action::Use => {
            if s.extras.missile.is_none() {
                s.extras.missile = Some(s.avatar);
            }
        }
        Action::Up | Action::Down => unreachable!("aliens has no vertical moves"),
    }

    if let Some(m) = s.extras.missile {
        let next = Pos::new(m.x, m.y - 1);
        s.extras.missile = if next.y < 0 { None } else { Some(next) };
        hit_with_missile(s);
    }

    for bomb in &mut s.movables {
        bomb.pos.y += 1;
    }
    let h = s.height;
    s.movables.retain(|b| b.pos.y < h);

    if (s.tick + 1) % MARCH_PERIOD == 0 {
        march(s);
        hit_with_missile(s);
    }

    let width = s.width;
    for alien in &s.npcs {
        if rng.gen_bool(BOMB_PROB) {
            let p = Pos::new(alien.pos.x, alien.pos.y + 1);
            if p.y < h && p.x < width {
                s.movables.push(Sprite::new(p, SpriteKind::Bomb));
            }
        }
    }

    let bombed = s.movables.iter().any(|b| b.pos == s.avatar);
    let invaded = s.npcs.iter().any(|a| a.pos.y >= s.avatar.y);
    if bombed || invaded {
        s.status = Status::Loss;
    } else if s.npcs.is_empty() {
        s.status = Status::Win;
    }
}

fn hit_with_missile(s: &mut GameState) {
    let Some(m) = s.extras.missile else { return };
    if let Some(i) = s.npcs.iter().position(|a| a.pos == m) {
        s.npcs.remove(i);
        s.extras.missile = None;
        s.score += KILL_SCORE;
    }
}

fn march(s: &mut GameState) {
    if s.npcs.is_empty() {
        return;
    }
    let dir = s.extras.march;
    let blocked = s
        .npcs
        .iter()
        .any(|a| a.pos.x + dir < 0 || a.pos.x + dir >= s.width);
    if blocked {
        for a in &mut s.npcs {
            a.pos.y += 1;
        }
        s.extras.march = -dir;
    } else {
        for a in &mut s.npcs {
            a.pos.x += dir;
        }
    }
}
