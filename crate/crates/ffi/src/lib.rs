//! C ABI over the shadowbench core.
//!
//! Every handle is opaque and owned by the caller, who releases it with the
//! matching `*_free`. Functions return an [`ShbStatus`]; on failure the
//! message is available from [`shb_last_error`] on the same thread.
//! Panics never cross the boundary: they surface as `SHB_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowbench::agents::{Agent, AgentConfig, AgentKind};
use shadowbench::analysis::sym_kl;
use shadowbench::engine::{extract_features, load_level, BudgetMeter, GameId, GameState, Status};
use shadowbench::policy_expr::{NodeContext, PolicyExpr};
use shadowbench::shadowing::{run_playthrough, Streams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Engine = 4,
    Agent = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShbGameStatus {
    Running = 0,
    Win = 1,
    Loss = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShbAgentKind {
    Random = 0,
    Osla = 1,
    Mcs = 2,
    Mcts = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShbFeatures {
    pub min_d_mov: f64,
    pub min_d_npc: f64,
    pub sum_d_npc: f64,
    pub n_npc: u32,
    pub min_d_portal: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShbNodeContext {
    pub max_r: f64,
    pub mean_reward: f64,
    pub child_visits: u32,
    pub parent_visits: u32,
    pub features: ShbFeatures,
}

/// Scalar part of a decision; `p` and `v` go to caller buffers.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShbDecision {
    pub a_star: u32,
    pub n_actions: u32,
    pub b: f64,
    pub conv: f64,
    pub calls: u32,
}

pub struct ShbPolicy {
    expr: PolicyExpr,
}

pub struct ShbGame {
    state: GameState,
    env: ChaCha8Rng,
}

pub struct ShbAgent {
    agent: Agent,
    rng: ChaCha8Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

type FfiResult = Result<(), ShbStatus>;

fn fail(status: ShbStatus, message: impl Into<String>) -> ShbStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> FfiResult) -> ShbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShbStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(ShbStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, ShbStatus> {
    if p.is_null() {
        return Err(fail(ShbStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ShbStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, ShbStatus> {
    p.as_mut()
        .ok_or_else(|| fail(ShbStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, ShbStatus> {
    p.as_ref()
        .ok_or_else(|| fail(ShbStatus::NullPointer, format!("`{name}` is null")))
}

/// Copies `text` plus a NUL into `buf`; `needed` receives the full size.
/// Leaves the last error alone.
unsafe fn copy_str(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> bool {
    let size = text.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if buf.is_null() || len < size {
        return false;
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    true
}

unsafe fn write_str(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> FfiResult {
    if copy_str(text, buf, len, needed) {
        Ok(())
    } else {
        Err(fail(
            ShbStatus::BufferTooSmall,
            format!("buffer of {len} bytes, {} needed", text.len() + 1),
        ))
    }
}

/// Message of the last failed call on this thread, or an empty string.
/// Same buffer protocol as [`shb_policy_render`].
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be null); `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn shb_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> ShbStatus {
    let text = LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|c| c.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    if copy_str(&text, buf, len, needed) {
        ShbStatus::Ok
    } else {
        ShbStatus::BufferTooSmall
    }
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shb_policy_parse(text: *const c_char, out: *mut *mut ShbPolicy) -> ShbStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let expr = PolicyExpr::parse(text).map_err(|e| fail(ShbStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(ShbPolicy { expr }));
        Ok(())
    })
}

/// The reference heuristic.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shb_policy_reference(out: *mut *mut ShbPolicy) -> ShbStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = Box::into_raw(Box::new(ShbPolicy {
            expr: PolicyExpr::reference(),
        }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn shb_policy_free(policy: *mut ShbPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

fn node_context(c: &ShbNodeContext) -> NodeContext {
    NodeContext {
        max_r: c.max_r,
        mean_reward: c.mean_reward,
        child_visits: c.child_visits,
        parent_visits: c.parent_visits,
        features: shadowbench::engine::StateFeatures {
            min_d_mov: c.features.min_d_mov,
            min_d_npc: c.features.min_d_npc,
            sum_d_npc: c.features.sum_d_npc,
            n_npc: c.features.n_npc,
            min_d_portal: c.features.min_d_portal,
        },
    }
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shb_policy_eval(
    policy: *const ShbPolicy,
    ctx: *const ShbNodeContext,
    out: *mut f64,
) -> ShbStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        let ctx = ref_arg(ctx, "ctx")?;
        *mut_arg(out, "out")? = policy.expr.eval(&node_context(ctx));
        Ok(())
    })
}

/// Canonical rendering. Call with a null `buf` to learn the size.
///
/// # Safety
/// `policy` must be valid; `buf` must point to `len` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn shb_policy_render(
    policy: *const ShbPolicy,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ShbStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        write_str(&policy.expr.canonical(), buf, len, needed)
    })
}

/// Number of distinct prunings, the policy itself included.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shb_policy_pruning_count(policy: *const ShbPolicy, out: *mut usize) -> ShbStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        *mut_arg(out, "out")? = policy.expr.prunings().len();
        Ok(())
    })
}

/// The `index`-th pruning as a new policy handle.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shb_policy_pruning(
    policy: *const ShbPolicy,
    index: usize,
    out: *mut *mut ShbPolicy,
) -> ShbStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let policy = ref_arg(policy, "policy")?;
        let all = policy.expr.prunings();
        let expr = all.get(index).cloned().ok_or_else(|| {
            fail(
                ShbStatus::InvalidArgument,
                format!("pruning index {index} out of range {}", all.len()),
            )
        })?;
        *out = Box::into_raw(Box::new(ShbPolicy { expr }));
        Ok(())
    })
}

/// Loads a bundled level. The environment random stream is the one a
/// playthrough with the same seed would use.
///
/// # Safety
/// `game` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shb_game_load(
    game: *const c_char,
    level: u32,
    seed: u64,
    out: *mut *mut ShbGame,
) -> ShbStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let id: GameId = str_arg(game, "game")?
            .parse()
            .map_err(|e: shadowbench::engine::EngineError| fail(ShbStatus::InvalidArgument, e.to_string()))?;
        let state = load_level(id, level, seed).map_err(|e| fail(ShbStatus::Engine, e.to_string()))?;
        *out = Box::into_raw(Box::new(ShbGame {
            state,
            env: Streams::new(seed).env,
        }));
        Ok(())
    })
}

/// # Safety
/// `game` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn shb_game_free(game: *mut ShbGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Legal action count; 0 once the game is over.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shb_game_num_actions(game: *const ShbGame, out: *mut u32) -> ShbStatus {
    guard(|| {
        let game = ref_arg(game, "game")?;
        *mut_arg(out, "out")? = game.state.legal_actions().len() as u32;
        Ok(())
    })
}

/// Name of legal action `index` (e.g. `LEFT`).
///
/// # Safety
/// `game` must be valid; `buf` must point to `len` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn shb_game_action_name(
    game: *const ShbGame,
    index: u32,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ShbStatus {
    guard(|| {
        let game = ref_arg(game, "game")?;
        let legal = game.state.legal_actions();
        let action = legal.get(index as usize).ok_or_else(|| {
            fail(
                ShbStatus::InvalidArgument,
                format!("action index {index} out of range {}", legal.len()),
            )
        })?;
        write_str(action.name(), buf, len, needed)
    })
}

/// Plays legal action `index` in the real environment.
///
/// # Safety
/// `game` must be valid.
#[no_mangle]
pub unsafe extern "C" fn shb_game_step(game: *mut ShbGame, index: u32) -> ShbStatus {
    guard(|| {
        let game = mut_arg(game, "game")?;
        let legal = game.state.legal_actions();
        let action = *legal.get(index as usize).ok_or_else(|| {
            fail(
                ShbStatus::InvalidArgument,
                format!("action index {index} out of range {}", legal.len()),
            )
        })?;
        game.state = game
            .state
            .step(action, &mut game.env)
            .map_err(|e| fail(ShbStatus::Engine, e.to_string()))?;
        Ok(())
    })
}

/// # Safety
/// All pointers must be valid; any of `status`, `score`, `tick` may be null.
#[no_mangle]
pub unsafe extern "C" fn shb_game_info(
    game: *const ShbGame,
    status: *mut ShbGameStatus,
    score: *mut f64,
    tick: *mut u32,
) -> ShbStatus {
    guard(|| {
        let s = &ref_arg(game, "game")?.state;
        if let Some(out) = status.as_mut() {
            *out = match s.status {
                Status::Running => ShbGameStatus::Running,
                Status::Win => ShbGameStatus::Win,
                Status::Loss => ShbGameStatus::Loss,
            };
        }
        if let Some(out) = score.as_mut() {
            *out = s.score;
        }
        if let Some(out) = tick.as_mut() {
            *out = s.tick;
        }
        Ok(())
    })
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shb_game_features(game: *const ShbGame, out: *mut ShbFeatures) -> ShbStatus {
    guard(|| {
        let f = extract_features(&ref_arg(game, "game")?.state);
        *mut_arg(out, "out")? = ShbFeatures {
            min_d_mov: f.min_d_mov,
            min_d_npc: f.min_d_npc,
            sum_d_npc: f.sum_d_npc,
            n_npc: f.n_npc,
            min_d_portal: f.min_d_portal,
        };
        Ok(())
    })
}

unsafe fn agent_config(
    kind: ShbAgentKind,
    policy: *const c_char,
    rollout_depth: u32,
    alpha: f64,
) -> Result<AgentConfig, ShbStatus> {
    let kind = match kind {
        ShbAgentKind::Random => AgentKind::Random,
        ShbAgentKind::Osla => AgentKind::Osla,
        ShbAgentKind::Mcs => AgentKind::Mcs,
        ShbAgentKind::Mcts => AgentKind::Mcts,
    };
    let mut cfg = AgentConfig::simple("ffi", kind);
    if !policy.is_null() {
        cfg.policy = Some(str_arg(policy, "policy")?.to_string());
    }
    if rollout_depth != 0 {
        cfg.rollout_depth = rollout_depth;
    }
    if !alpha.is_nan() {
        cfg.alpha = Some(alpha);
    }
    Ok(cfg)
}

/// Creates an agent. `policy` (MCTS only) is an expression or `ucb`;
/// `rollout_depth` 0 and `alpha` NaN select the defaults.
///
/// # Safety
/// `policy` must be NUL-terminated or null; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shb_agent_new(
    kind: ShbAgentKind,
    policy: *const c_char,
    rollout_depth: u32,
    alpha: f64,
    seed: u64,
    out: *mut *mut ShbAgent,
) -> ShbStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = agent_config(kind, policy, rollout_depth, alpha)?;
        let agent = cfg.build().map_err(|e| fail(ShbStatus::Agent, e.to_string()))?;
        *out = Box::into_raw(Box::new(ShbAgent {
            agent,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }));
        Ok(())
    })
}

/// # Safety
/// `agent` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn shb_agent_free(agent: *mut ShbAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// One decision on the game's current state with a fresh meter of `cap`
/// calls. `p` and `v` must each hold `len` doubles, `len` at least the
/// legal action count; NaN in `v` marks "no estimate".
///
/// # Safety
/// All pointers must be valid and the buffers at least `len` long.
#[no_mangle]
pub unsafe extern "C" fn shb_agent_decide(
    agent: *mut ShbAgent,
    game: *const ShbGame,
    cap: u32,
    out: *mut ShbDecision,
    p: *mut f64,
    v: *mut f64,
    len: usize,
) -> ShbStatus {
    guard(|| {
        let agent = mut_arg(agent, "agent")?;
        let game = ref_arg(game, "game")?;
        let out = mut_arg(out, "out")?;
        if p.is_null() || v.is_null() {
            return Err(fail(ShbStatus::NullPointer, "`p` or `v` is null"));
        }
        let n = game.state.legal_actions().len();
        if len < n {
            return Err(fail(
                ShbStatus::BufferTooSmall,
                format!("buffers hold {len} values, {n} needed"),
            ));
        }
        let mut meter = BudgetMeter::new(cap);
        let d = agent
            .agent
            .decide(&game.state, &mut meter, &mut agent.rng)
            .map_err(|e| fail(ShbStatus::Agent, e.to_string()))?;
        ptr::copy_nonoverlapping(d.p.as_ptr(), p, n);
        ptr::copy_nonoverlapping(d.v.as_ptr(), v, n);
        *out = ShbDecision {
            a_star: d.a_star as u32,
            n_actions: n as u32,
            b: d.b,
            conv: d.conv,
            calls: d.calls,
        };
        Ok(())
    })
}

/// Half-sum symmetric KL divergence of two length-`n` distributions.
///
/// # Safety
/// `p` and `q` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn shb_sym_kl(p: *const f64, q: *const f64, n: usize, out: *mut f64) -> ShbStatus {
    guard(|| {
        if p.is_null() || q.is_null() {
            return Err(fail(ShbStatus::NullPointer, "`p` or `q` is null"));
        }
        let (p, q) = (std::slice::from_raw_parts(p, n), std::slice::from_raw_parts(q, n));
        *mut_arg(out, "out")? = sym_kl(p, q).map_err(|e| fail(ShbStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Runs one main/shadow playthrough and writes its JSONL log into `buf`.
/// Agents are described as for [`shb_agent_new`] minus the seed.
///
/// # Safety
/// String arguments must be NUL-terminated (policies may be null); `buf`
/// must point to `len` writable bytes or be null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn shb_run_playthrough(
    game: *const c_char,
    level: u32,
    main_kind: ShbAgentKind,
    main_policy: *const c_char,
    shadow_kind: ShbAgentKind,
    shadow_policy: *const c_char,
    cap: u32,
    seed: u64,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ShbStatus {
    guard(|| {
        let id: GameId = str_arg(game, "game")?
            .parse()
            .map_err(|e: shadowbench::engine::EngineError| fail(ShbStatus::InvalidArgument, e.to_string()))?;
        let mut main = agent_config(main_kind, main_policy, 0, f64::NAN)?;
        main.label = "main".into();
        let mut shadow = agent_config(shadow_kind, shadow_policy, 0, f64::NAN)?;
        shadow.label = "shadow".into();
        let log = run_playthrough(id, level, &main, &shadow, cap, seed)
            .map_err(|e| fail(ShbStatus::Agent, e.to_string()))?;
        write_str(&log.to_jsonl(), buf, len, needed)
    })
}
