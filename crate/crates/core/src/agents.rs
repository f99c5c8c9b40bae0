//! The four agent families and the per-tick decision record they emit.
//!
//! Every agent reports, for the actions in the game's fixed order:
//! the recommended action index `a_star`, consideration probabilities `p`,
//! value estimates `v` (NaN where the agent has none), the consumed budget
//! ratio `b`, and `conv`, the budget ratio after which the recommendation
//! no longer changed.
//!
//! Recommendations always break ties by lowest index. For the sampling
//! agents (MCS, MCTS) a state where every action holds the same value is
//! treated as "no preference yet": if the search ends that way `conv`
//! equals `b`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, GameModel, Status, BudgetMeter};
use crate::policy_expr::{NodeContext, PolicyExpr, PolicyParseError, TreePolicy};

/// Terminal bonus (win) or penalty (loss) added to state evaluations.
pub const TERMINAL_BONUS: f64 = 10_000.0;
pub const DEFAULT_ROLLOUT_DEPTH: u32 = 10;
pub const DEFAULT_UCB_ALPHA: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("agent needs at least {needed} forward-model calls, cap is {cap}")]
    BudgetTooSmall { needed: u32, cap: u32 },
    #[error("cannot decide in a terminal state")]
    Terminal,
    #[error("invalid agent config `{label}`: {message}")]
    Config { label: String, message: String },
    #[error("invalid policy for agent `{label}`: {source}")]
    Policy {
        label: String,
        source: PolicyParseError,
    },
}

/// One agent's metrics for one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub a_star: usize,
    pub p: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub v: Vec<f64>,
    pub b: f64,
    pub conv: f64,
    /// Forward-model calls actually charged.
    pub calls: u32,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| if x.is_nan() { None } else { Some(*x) }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

/// Lowest-index argmax over the non-NaN entries.
pub fn argmax_lowest(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in values.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        if best.map_or(true, |(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

impl Decision {
    /// Checks the record invariants; `Err` names the first violation.
    pub fn validate(&self, cap: u32) -> Result<(), String> {
        let n = self.p.len();
        if n == 0 || self.v.len() != n {
            return Err(format!("vector lengths p={} v={}", n, self.v.len()));
        }
        if self.a_star >= n {
            return Err(format!("a_star {} out of range {n}", self.a_star));
        }
        if self.p.iter().any(|&x| !(x >= 0.0)) {
            return Err(format!("negative or NaN probability in {:?}", self.p));
        }
        let sum: f64 = self.p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("probabilities sum to {sum}"));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(format!("b = {} outside [0, 1]", self.b));
        }
        if !(0.0 <= self.conv && self.conv <= self.b) {
            return Err(format!("conv = {} outside [0, b = {}]", self.conv, self.b));
        }
        if self.calls > cap {
            return Err(format!("{} calls exceed cap {cap}", self.calls));
        }
        if let Some(best) = argmax_lowest(&self.v) {
            if best != self.a_star {
                return Err(format!("a_star {} is not the argmax {best} of v", self.a_star));
            }
        }
        Ok(())
    }
}

/// Recommendation state tracked while a search runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leader {
    /// No values yet, or every action valued identically.
    Undecided,
    Action(usize),
}

/// One observation of the root recommendation: calls used so far and the
/// leader at that point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePoint {
    pub calls: u32,
    pub leader: Leader,
}

fn leader_of(values: &[f64]) -> Leader {
    let Some(best) = argmax_lowest(values) else {
        return Leader::Undecided;
    };
    let all_equal = values.iter().all(|&x| x == values[best]);
    if all_equal {
        Leader::Undecided
    } else {
        Leader::Action(best)
    }
}

#[derive(Debug, Default)]
struct ConvTracker {
    current: Option<Leader>,
    since: u32,
    trace: Vec<TracePoint>,
}

impl ConvTracker {
    fn observe(&mut self, values: &[f64], calls: u32) {
        let leader = leader_of(values);
        if self.current != Some(leader) {
            self.current = Some(leader);
            self.since = calls;
        }
        self.trace.push(TracePoint { calls, leader });
    }

    fn conv(&self, used: u32, cap: u32) -> f64 {
        match self.current {
            Some(Leader::Action(_)) => f64::from(self.since) / f64::from(cap),
            _ => f64::from(used) / f64::from(cap),
        }
    }
}

/// Evaluation used by OSLA and MCS: dominant win/loss term, plus score,
/// minus 100 per NPC and 0.1 per cell of distance to the nearest portal.
pub fn simple_state_heuristic<S: GameModel>(_from: &S, to: &S) -> f64 {
    let f = to.features();
    status_bonus(to.status()) + to.score() - 100.0 * f64::from(f.n_npc) - 0.1 * f.min_d_portal
}

/// Rollout reward for MCTS: score plus the terminal bonus or penalty.
pub fn rollout_value<S: GameModel>(s: &S) -> f64 {
    s.score() + status_bonus(s.status())
}

fn status_bonus(status: Status) -> f64 {
    match status {
        Status::Win => TERMINAL_BONUS,
        Status::Loss => -TERMINAL_BONUS,
        Status::Running => 0.0,
    }
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn running_actions<S: GameModel>(state: &S) -> Result<usize, AgentError> {
    match state.legal().len() {
        0 => Err(AgentError::Terminal),
        n => Ok(n),
    }
}

fn ratio(calls: u32, cap: u32) -> f64 {
    f64::from(calls) / f64::from(cap)
}

pub fn random_decide<S: GameModel, R: Rng + ?Sized>(
    state: &S,
    _meter: &mut BudgetMeter,
    rng: &mut R,
) -> Result<Decision, AgentError> {
    let n = running_actions(state)?;
    Ok(uniform_pick(n, rng))
}

fn uniform_pick<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Decision {
    Decision {
        a_star: rng.gen_range(0..n),
        p: uniform(n),
        v: vec![f64::NAN; n],
        b: 0.0,
        conv: 0.0,
        calls: 0,
    }
}

/// One-step look-ahead: one simulation per action, scored by the simple
/// state heuristic.
pub fn osla_decide<S: GameModel, R: Rng + ?Sized>(
    state: &S,
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> Result<Decision, AgentError> {
    let n = running_actions(state)?;
    if (meter.remaining() as usize) < n {
        return Err(AgentError::BudgetTooSmall {
            needed: n as u32,
            cap: meter.cap(),
        });
    }
    let start = meter.used();
    let mut v = Vec::with_capacity(n);
    for &a in state.legal() {
        let next = state.advance_with(a, meter, rng)?;
        v.push(simple_state_heuristic(state, &next));
    }
    let a_star = argmax_lowest(&v).unwrap_or(0);
    let cap = meter.cap();
    let calls = meter.used() - start;
    Ok(Decision {
        a_star,
        p: uniform(n),
        v,
        b: ratio(calls, cap),
        // the best action was simulated as the (a_star + 1)-th call
        conv: ratio(a_star as u32 + 1, cap),
        calls,
    })
}

/// Monte-Carlo search over random action sequences of bounded length.
pub fn mcs_decide<S: GameModel, R: Rng + ?Sized>(
    state: &S,
    meter: &mut BudgetMeter,
    rng: &mut R,
    depth: u32,
) -> Result<Decision, AgentError> {
    mcs_decide_traced(state, meter, rng, depth).map(|(d, _)| d)
}

pub fn mcs_decide_traced<S: GameModel, R: Rng + ?Sized>(
    state: &S,
    meter: &mut BudgetMeter,
    rng: &mut R,
    depth: u32,
) -> Result<(Decision, Vec<TracePoint>), AgentError> {
    let n = running_actions(state)?;
    let actions = state.legal();
    let start = meter.used();
    let mut counts = vec![0u32; n];
    let mut sums = vec![0.0f64; n];
    let mut tracker = ConvTracker::default();
    let depth = depth.max(1);

    let values = |counts: &[u32], sums: &[f64]| -> Vec<f64> {
        counts
            .iter()
            .zip(sums)
            .map(|(&c, &s)| if c == 0 { f64::NAN } else { s / f64::from(c) })
            .collect()
    };

    'sampling: while !meter.is_exhausted() {
        let first = rng.gen_range(0..n);
        let mut s = state.advance_with(actions[first], meter, rng)?;
        let mut len = 1;
        while len < depth && !s.is_over() {
            if meter.is_exhausted() {
                // partial final sequence: discarded
                break 'sampling;
            }
            let legal = s.legal();
            let a = legal[rng.gen_range(0..legal.len())];
            s = s.advance_with(a, meter, rng)?;
            len += 1;
        }
        counts[first] += 1;
        sums[first] += simple_state_heuristic(state, &s);
        tracker.observe(&values(&counts, &sums), meter.used() - start);
    }

    let cap = meter.cap();
    let calls = meter.used() - start;
    let total: u32 = counts.iter().sum();
    let v = values(&counts, &sums);
    let p = if total == 0 {
        uniform(n)
    } else {
        counts.iter().map(|&c| f64::from(c) / f64::from(total)).collect()
    };
    let decision = Decision {
        a_star: argmax_lowest(&v).unwrap_or(0),
        p,
        v,
        b: ratio(calls, cap),
        conv: tracker.conv(calls, cap),
        calls,
    };
    Ok((decision, tracker.trace))
}

#[derive(Debug, Clone)]
struct Node {
    children: Vec<Option<usize>>,
    visits: u32,
    total: f64,
    max_r: f64,
    depth: u32,
    features: crate::engine::StateFeatures,
}

impl Node {
    fn new<S: GameModel>(s: &S, depth: u32, n_actions: usize) -> Self {
        Node {
            children: vec![None; n_actions],
            visits: 0,
            total: 0.0,
            max_r: f64::NEG_INFINITY,
            depth,
            features: s.features(),
        }
    }

    fn mean(&self) -> f64 {
        if self.visits == 0 {
            f64::NAN
        } else {
            self.total / f64::from(self.visits)
        }
    }
}

/// Statistics of the root after a search, exposed for tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSummary {
    pub iterations: u32,
    pub root_child_visits: Vec<u32>,
    /// `child_visits <= parent_visits` held at every node.
    pub visits_consistent: bool,
    pub trace: Vec<TracePoint>,
}

/// Open-loop MCTS: every iteration re-simulates from the root along the
/// selected path, so stochastic games stay honest. Each node keeps the
/// features of the last state reached through it; the tree policy scores
/// children from those. Depth counts from the root, rollouts included.
pub fn mcts_decide<S: GameModel, R: Rng + ?Sized>(
    state: &S,
    meter: &mut BudgetMeter,
    rng: &mut R,
    policy: &TreePolicy,
    depth: u32,
) -> Result<Decision, AgentError> {
    mcts_search(state, meter, rng, policy, depth).map(|(d, _)| d)
}

pub fn mcts_search<S: GameModel, R: Rng + ?Sized>(
    state: &S,
    meter: &mut BudgetMeter,
    rng: &mut R,
    policy: &TreePolicy,
    depth: u32,
) -> Result<(Decision, SearchSummary), AgentError> {
    let n = running_actions(state)?;
    let depth = depth.max(1);
    let start = meter.used();
    let mut nodes = vec![Node::new(state, 0, n)];
    let mut tracker = ConvTracker::default();
    let mut iterations = 0u32;
    let mut path = Vec::with_capacity(depth as usize + 1);

    while !meter.is_exhausted() {
        let mut s = state.clone();
        let mut node = 0usize;
        path.clear();
        path.push(0usize);

        while !s.is_over() && nodes[node].depth < depth && !meter.is_exhausted() {
            let legal = s.legal();
            // open loop: a node first reached in a terminal state may be
            // reached in a running one later
            if nodes[node].children.len() < legal.len() {
                nodes[node].children.resize(legal.len(), None);
            }
            let unexpanded = nodes[node].children.iter().position(Option::is_none);
            let (idx, expanding) = match unexpanded {
                Some(i) => (i, true),
                None => (select_child(&nodes, node, policy), false),
            };
            s = s.advance_with(legal[idx], meter, rng)?;
            let child = match nodes[node].children[idx] {
                Some(c) => {
                    nodes[c].features = s.features();
                    c
                }
                None => {
                    let c = nodes.len();
                    let width = if s.is_over() { 0 } else { s.legal().len() };
                    nodes.push(Node::new(&s, nodes[node].depth + 1, width));
                    nodes[node].children[idx] = Some(c);
                    c
                }
            };
            node = child;
            path.push(node);
            if expanding {
                break;
            }
        }

        let mut d = nodes[node].depth;
        while d < depth && !s.is_over() && !meter.is_exhausted() {
            let legal = s.legal();
            let a = legal[rng.gen_range(0..legal.len())];
            s = s.advance_with(a, meter, rng)?;
            d += 1;
        }

        let reward = rollout_value(&s);
        for &id in &path {
            let nd = &mut nodes[id];
            nd.visits += 1;
            nd.total += reward;
            nd.max_r = nd.max_r.max(reward);
        }
        iterations += 1;
        let root_values: Vec<f64> = nodes[0]
            .children
            .iter()
            .map(|c| c.map_or(f64::NAN, |c| nodes[c].mean()))
            .collect();
        tracker.observe(&root_values, meter.used() - start);
    }

    let cap = meter.cap();
    let calls = meter.used() - start;
    let root_child_visits: Vec<u32> = nodes[0]
        .children
        .iter()
        .map(|c| c.map_or(0, |c| nodes[c].visits))
        .collect();
    let total: u32 = root_child_visits.iter().sum();
    let v: Vec<f64> = nodes[0]
        .children
        .iter()
        .map(|c| c.map_or(f64::NAN, |c| nodes[c].mean()))
        .collect();
    let p = if total == 0 {
        uniform(n)
    } else {
        root_child_visits
            .iter()
            .map(|&c| f64::from(c) / f64::from(total))
            .collect()
    };
    let visits_consistent = nodes.iter().all(|nd| {
        nd.children
            .iter()
            .flatten()
            .all(|&c| nodes[c].visits <= nd.visits)
    });
    let decision = Decision {
        a_star: argmax_lowest(&v).unwrap_or(0),
        p,
        v,
        b: ratio(calls, cap),
        conv: tracker.conv(calls, cap),
        calls,
    };
    Ok((
        decision,
        SearchSummary {
            iterations,
            root_child_visits,
            visits_consistent,
            trace: tracker.trace,
        },
    ))
}

fn child_context(nodes: &[Node], parent: usize, child: usize) -> NodeContext {
    let c = &nodes[child];
    NodeContext {
        max_r: c.max_r,
        mean_reward: c.mean(),
        child_visits: c.visits,
        parent_visits: nodes[parent].visits,
        features: c.features,
    }
}

fn select_child(nodes: &[Node], parent: usize, policy: &TreePolicy) -> usize {
    let scores: Vec<f64> = nodes[parent]
        .children
        .iter()
        .map(|c| {
            let c = c.expect("selection runs on fully expanded nodes");
            policy.score(&child_context(nodes, parent, c))
        })
        .collect();
    argmax_lowest(&scores).unwrap_or(0)
}

/// Picks a child index from precomputed contexts; exposed so selection-level
/// properties can be tested without running a search.
pub fn select_by_policy(policy: &TreePolicy, contexts: &[NodeContext]) -> usize {
    let scores: Vec<f64> = contexts.iter().map(|c| policy.score(c)).collect();
    argmax_lowest(&scores).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Random,
    Osla,
    Mcs,
    Mcts,
}

fn default_depth() -> u32 {
    DEFAULT_ROLLOUT_DEPTH
}

/// Agent description as it appears in config files and log headers.
/// `policy` is either `ucb` or an infix expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub label: String,
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default = "default_depth")]
    pub rollout_depth: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl AgentConfig {
    pub fn simple(label: impl Into<String>, kind: AgentKind) -> Self {
        AgentConfig {
            label: label.into(),
            kind,
            policy: None,
            rollout_depth: DEFAULT_ROLLOUT_DEPTH,
            alpha: None,
        }
    }

    pub fn mcts(label: impl Into<String>, policy: impl Into<String>) -> Self {
        AgentConfig {
            policy: Some(policy.into()),
            ..AgentConfig::simple(label, AgentKind::Mcts)
        }
    }

    pub fn ucb(label: impl Into<String>, alpha: f64) -> Self {
        AgentConfig {
            alpha: Some(alpha),
            ..AgentConfig::mcts(label, "ucb")
        }
    }

    pub fn build(&self) -> Result<Agent, AgentError> {
        let bad = |message: &str| AgentError::Config {
            label: self.label.clone(),
            message: message.to_string(),
        };
        if self.rollout_depth == 0 {
            return Err(bad("rollout_depth must be at least 1"));
        }
        if self.kind != AgentKind::Mcts && self.policy.is_some() {
            return Err(bad("only mcts agents take a policy"));
        }
        let depth = self.rollout_depth;
        Ok(match self.kind {
            AgentKind::Random => Agent::Random,
            AgentKind::Osla => Agent::Osla,
            AgentKind::Mcs => Agent::Mcs { depth },
            AgentKind::Mcts => {
                let text = self.policy.as_deref().ok_or_else(|| bad("mcts requires a policy"))?;
                let policy = if text.trim().eq_ignore_ascii_case("ucb") {
                    let alpha = self.alpha.unwrap_or(DEFAULT_UCB_ALPHA);
                    if !(alpha.is_finite() && alpha >= 0.0) {
                        return Err(bad("alpha must be finite and non-negative"));
                    }
                    TreePolicy::Ucb { alpha }
                } else {
                    if self.alpha.is_some() {
                        return Err(bad("alpha applies to the ucb policy only"));
                    }
                    TreePolicy::Expr(PolicyExpr::parse(text).map_err(|source| AgentError::Policy {
                        label: self.label.clone(),
                        source,
                    })?)
                };
                Agent::Mcts { policy, depth }
            }
        })
    }

    /// Smallest per-tick cap this agent can work with.
    pub fn min_budget(&self, n_actions: usize) -> u32 {
        match self.kind {
            AgentKind::Random => 0,
            AgentKind::Osla => n_actions as u32,
            AgentKind::Mcs | AgentKind::Mcts => 1,
        }
    }
}

impl fmt::Display for AgentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// A validated, ready-to-run agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Random,
    Osla,
    Mcs { depth: u32 },
    Mcts { policy: TreePolicy, depth: u32 },
}

impl Agent {
    pub fn decide<S: GameModel, R: Rng + ?Sized>(
        &self,
        state: &S,
        meter: &mut BudgetMeter,
        rng: &mut R,
    ) -> Result<Decision, AgentError> {
        match self {
            Agent::Random => random_decide(state, meter, rng),
            Agent::Osla => osla_decide(state, meter, rng),
            Agent::Mcs { depth } => mcs_decide(state, meter, rng, *depth),
            Agent::Mcts { policy, depth } => mcts_decide(state, meter, rng, policy, *depth),
        }
    }
}
