//! Tree-policy expressions over node statistics and state features.
//!
//! Expressions render to a fully parenthesised infix form, which doubles as
//! the canonical key for de-duplication. The textual grammar accepted by
//! [`PolicyExpr::parse`] is documented in `docs/policy.md`.
//!
//! [`PolicyExpr::prunings`] enumerates every expression reachable by deleting
//! subtrees. A deleted child of `+`, `-` or `*` collapses its parent to the
//! surviving child; a deleted denominator collapses a division to its
//! numerator, while a deleted numerator becomes the constant `1`; a unary
//! node disappears with its operand.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::engine::StateFeatures;

/// Denominators smaller than this in magnitude are pushed out to it.
pub const DIV_FLOOR: f64 = 0.1;
/// Stand-in for +inf returned for unvisited children.
pub const UNVISITED_UCB: f64 = 1e18;

/// The reference heuristic whose prunings form the MCTS roster.
pub const REFERENCE_POLICY: &str = "MIN_D_MOV * MIN_D_NPC + abs(MAX_R) / SUM_D_NPC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Highest rollout reward seen through the node.
    MaxR,
    MinDMov,
    MinDNpc,
    SumDNpc,
    /// Visits of the child being scored.
    ChildVisits,
    /// Visits of its parent.
    ParentVisits,
    MeanReward,
}

impl Var {
    const ALL: [Var; 7] = [
        Var::MaxR,
        Var::MinDMov,
        Var::MinDNpc,
        Var::SumDNpc,
        Var::ChildVisits,
        Var::ParentVisits,
        Var::MeanReward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Var::MaxR => "MAX_R",
            Var::MinDMov => "MIN_D_MOV",
            Var::MinDNpc => "MIN_D_NPC",
            Var::SumDNpc => "SUM_D_NPC",
            Var::ChildVisits => "CHILD_VISITS",
            Var::ParentVisits => "PARENT_VISITS",
            Var::MeanReward => "MEAN_REWARD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Abs,
    Ln,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Abs => "abs",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyExpr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<PolicyExpr>),
    Binary(BinaryOp, Box<PolicyExpr>, Box<PolicyExpr>),
}

/// What a tree policy sees when scoring one child.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeContext {
    pub max_r: f64,
    pub mean_reward: f64,
    pub child_visits: u32,
    pub parent_visits: u32,
    pub features: StateFeatures,
}

fn finite(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(f64::MIN, f64::MAX)
    }
}

fn safe_div(num: f64, den: f64) -> f64 {
    let den = if den.abs() < DIV_FLOOR {
        if den < 0.0 {
            -DIV_FLOOR
        } else {
            DIV_FLOOR
        }
    } else {
        den
    };
    num / den
}

impl PolicyExpr {
    pub fn var(v: Var) -> Self {
        PolicyExpr::Var(v)
    }

    pub fn unary(op: UnaryOp, e: PolicyExpr) -> Self {
        PolicyExpr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: PolicyExpr, r: PolicyExpr) -> Self {
        PolicyExpr::Binary(op, Box::new(l), Box::new(r))
    }

    /// The reference heuristic as an expression tree.
    pub fn reference() -> Self {
        use BinaryOp::*;
        PolicyExpr::binary(
            Add,
            PolicyExpr::binary(Mul, PolicyExpr::var(Var::MinDMov), PolicyExpr::var(Var::MinDNpc)),
            PolicyExpr::binary(
                Div,
                PolicyExpr::unary(UnaryOp::Abs, PolicyExpr::var(Var::MaxR)),
                PolicyExpr::var(Var::SumDNpc),
            ),
        )
    }

    pub fn parse(text: &str) -> Result<Self, PolicyParseError> {
        Parser::new(text).parse_all()
    }

    /// Total evaluation: never NaN, never infinite.
    pub fn eval(&self, ctx: &NodeContext) -> f64 {
        let v = match self {
            PolicyExpr::Const(c) => *c,
            PolicyExpr::Var(v) => match v {
                Var::MaxR => ctx.max_r,
                Var::MinDMov => ctx.features.min_d_mov,
                Var::MinDNpc => ctx.features.min_d_npc,
                Var::SumDNpc => ctx.features.sum_d_npc,
                Var::ChildVisits => f64::from(ctx.child_visits),
                Var::ParentVisits => f64::from(ctx.parent_visits),
                Var::MeanReward => ctx.mean_reward,
            },
            PolicyExpr::Unary(op, e) => {
                let x = e.eval(ctx);
                match op {
                    UnaryOp::Abs => x.abs(),
                    UnaryOp::Ln if x > 0.0 => x.ln(),
                    UnaryOp::Sqrt if x > 0.0 => x.sqrt(),
                    UnaryOp::Ln | UnaryOp::Sqrt => 0.0,
                }
            }
            PolicyExpr::Binary(op, l, r) => {
                let (a, b) = (l.eval(ctx), r.eval(ctx));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => safe_div(a, b),
                }
            }
        };
        finite(v)
    }

    /// Canonical fully parenthesised rendering.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Every distinct pruning, the expression itself included, in a fixed
    /// order: for each child, "deleted" comes before the kept variants, and
    /// the left child varies slowest.
    pub fn prunings(&self) -> Vec<PolicyExpr> {
        let mut seen = HashSet::new();
        self.pruning_options()
            .into_iter()
            .flatten()
            .filter(|e| seen.insert(e.canonical()))
            .collect()
    }

    /// `None` stands for "this subtree was deleted".
    fn pruning_options(&self) -> Vec<Option<PolicyExpr>> {
        match self {
            PolicyExpr::Const(_) | PolicyExpr::Var(_) => vec![None, Some(self.clone())],
            PolicyExpr::Unary(op, child) => child
                .pruning_options()
                .into_iter()
                .map(|c| c.map(|c| PolicyExpr::unary(*op, c)))
                .collect(),
            PolicyExpr::Binary(op, l, r) => {
                let rights = r.pruning_options();
                let mut out = Vec::new();
                for lo in l.pruning_options() {
                    for ro in &rights {
                        out.push(match (lo.clone(), ro.clone()) {
                            (None, None) => None,
                            (Some(a), Some(b)) => Some(PolicyExpr::binary(*op, a, b)),
                            (Some(a), None) => Some(a),
                            (None, Some(b)) if *op == BinaryOp::Div => {
                                Some(PolicyExpr::binary(BinaryOp::Div, PolicyExpr::Const(1.0), b))
                            }
                            (None, Some(b)) => Some(b),
                        });
                    }
                }
                out
            }
        }
    }
}

impl fmt::Display for PolicyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyExpr::Const(c) => write!(f, "{c}"),
            PolicyExpr::Var(v) => f.write_str(v.name()),
            PolicyExpr::Unary(op, e) => write!(f, "{}({e})", op.name()),
            PolicyExpr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl FromStr for PolicyExpr {
    type Err = PolicyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyExpr::parse(s)
    }
}

impl Serialize for PolicyExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for PolicyExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        PolicyExpr::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Mean reward plus the exploration bonus `sqrt(alpha * ln(n) / n_a)`.
pub fn ucb_value(ctx: &NodeContext, alpha: f64) -> f64 {
    if ctx.child_visits == 0 {
        return UNVISITED_UCB;
    }
    let n = f64::from(ctx.parent_visits.max(1));
    let n_a = f64::from(ctx.child_visits);
    ctx.mean_reward + (alpha * n.ln() / n_a).sqrt()
}

/// How an MCTS agent ranks children during selection.
#[derive(Debug, Clone, PartialEq)]
pub enum TreePolicy {
    Ucb { alpha: f64 },
    Expr(PolicyExpr),
}

impl TreePolicy {
    pub fn score(&self, ctx: &NodeContext) -> f64 {
        match self {
            TreePolicy::Ucb { alpha } => ucb_value(ctx, *alpha),
            TreePolicy::Expr(e) => e.eval(ctx),
        }
    }
}

impl fmt::Display for TreePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreePolicy::Ucb { .. } => f.write_str("ucb"),
            TreePolicy::Expr(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("policy parse error at offset {offset}: {message}")]
pub struct PolicyParseError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0 }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, PolicyParseError> {
        Err(PolicyParseError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse_all(mut self) -> Result<PolicyExpr, PolicyParseError> {
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let e = self.expr()?;
        match self.peek() {
            None => Ok(e),
            Some(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn expr(&mut self) -> Result<PolicyExpr, PolicyParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = PolicyExpr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<PolicyExpr, PolicyParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.factor()?;
            lhs = PolicyExpr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<PolicyExpr, PolicyParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' || c == '-' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let start = self.pos;
                let ident: String = self.src[start..]
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                self.pos += ident.len();
                let lower = ident.to_ascii_lowercase();
                let func = match lower.as_str() {
                    "abs" => Some(UnaryOp::Abs),
                    "ln" => Some(UnaryOp::Ln),
                    "sqrt" => Some(UnaryOp::Sqrt),
                    _ => None,
                };
                if let Some(op) = func {
                    if !self.eat('(') {
                        return self.err(format!("expected `(` after {lower}"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return self.err("expected `)`");
                    }
                    return Ok(PolicyExpr::unary(op, arg));
                }
                let upper = ident.to_ascii_uppercase();
                match Var::ALL.into_iter().find(|v| v.name() == upper) {
                    Some(v) => Ok(PolicyExpr::Var(v)),
                    None => {
                        self.pos = start;
                        self.err(format!("unknown identifier `{ident}`"))
                    }
                }
            }
            Some(c) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<PolicyExpr, PolicyParseError> {
        let start = self.pos;
        let mut end = start;
        let bytes = self.src.as_bytes();
        if bytes.get(end) == Some(&b'-') {
            end += 1;
        }
        while end < bytes.len() && (bytes[end].is_ascii_digit() || matches!(bytes[end], b'.' | b'e' | b'E'))
            || (end > start && matches!(bytes.get(end), Some(b'-' | b'+')) && matches!(bytes[end - 1], b'e' | b'E'))
        {
            end += 1;
        }
        match self.src[start..end].parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(PolicyExpr::Const(v))
            }
            _ => self.err(format!("bad number `{}`", &self.src[start..end])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SUM_INF;

    pub(crate) fn ctx(min_d_mov: f64, min_d_npc: f64, sum_d_npc: f64, max_r: f64) -> NodeContext {
        NodeContext {
            max_r,
            mean_reward: 0.0,
            child_visits: 1,
            parent_visits: 1,
            features: StateFeatures {
                min_d_mov,
                min_d_npc,
                sum_d_npc,
                n_npc: 1,
                min_d_portal: 0.0,
            },
        }
    }

    #[test]
    fn reference_policy_hand_value() {
        // 2*3 + |-4|/10
        let v = PolicyExpr::reference().eval(&ctx(2.0, 3.0, 10.0, -4.0));
        assert!((v - 6.4).abs() < 1e-12);
        assert_eq!(PolicyExpr::parse(REFERENCE_POLICY).unwrap(), PolicyExpr::reference());
    }

    #[test]
    fn constant_ignores_context() {
        assert_eq!(PolicyExpr::Const(1.0).eval(&ctx(9.0, 9.0, 9.0, 9.0)), 1.0);
    }

    #[test]
    fn reciprocal_of_empty_npc_sum_vanishes() {
        let e = PolicyExpr::parse("1 / SUM_D_NPC").unwrap();
        let v = e.eval(&ctx(0.0, 0.0, SUM_INF, 0.0));
        assert!((v - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn division_floor_keeps_sign() {
        let e = PolicyExpr::parse("1 / MAX_R").unwrap();
        assert_eq!(e.eval(&ctx(0.0, 0.0, 0.0, 0.0)), 10.0);
        assert_eq!(e.eval(&ctx(0.0, 0.0, 0.0, -0.01)), -10.0);
        assert_eq!(e.eval(&ctx(0.0, 0.0, 0.0, 4.0)), 0.25);
    }

    #[test]
    fn ln_and_sqrt_of_nonpositive_are_zero() {
        let c = ctx(0.0, 0.0, 0.0, -3.0);
        assert_eq!(PolicyExpr::parse("ln(MAX_R)").unwrap().eval(&c), 0.0);
        assert_eq!(PolicyExpr::parse("sqrt(MAX_R)").unwrap().eval(&c), 0.0);
        assert_eq!(PolicyExpr::parse("ln(0)").unwrap().eval(&c), 0.0);
    }

    #[test]
    fn overflow_is_clamped() {
        let e = PolicyExpr::parse("1e300 * 1e300").unwrap();
        assert_eq!(e.eval(&ctx(0.0, 0.0, 0.0, 0.0)), f64::MAX);
    }

    #[test]
    fn ucb_hand_value() {
        let c = NodeContext {
            mean_reward: 0.5,
            child_visits: 10,
            parent_visits: 100,
            ..ctx(0.0, 0.0, 0.0, 0.0)
        };
        let expected = 0.5 + (2.0 * 100f64.ln() / 10.0).sqrt();
        assert!((ucb_value(&c, 2.0) - expected).abs() < 1e-12);
        assert!((ucb_value(&c, 2.0) - 1.4597).abs() < 1e-4);
        assert_eq!(ucb_value(&c, 0.0), 0.5);
        let fresh = NodeContext { child_visits: 0, ..c };
        assert_eq!(ucb_value(&fresh, 2.0), UNVISITED_UCB);
    }

    #[test]
    fn canonical_rendering_round_trips() {
        let e = PolicyExpr::reference();
        assert_eq!(
            e.canonical(),
            "((MIN_D_MOV * MIN_D_NPC) + (abs(MAX_R) / SUM_D_NPC))"
        );
        assert_eq!(PolicyExpr::parse(&e.canonical()).unwrap(), e);
        let neg = PolicyExpr::parse("MAX_R - -2.5").unwrap();
        assert_eq!(neg.canonical(), "(MAX_R - -2.5)");
        assert_eq!(PolicyExpr::parse(&neg.canonical()).unwrap(), neg);
    }

    #[test]
    fn parser_precedence_and_errors() {
        let e = PolicyExpr::parse("MEAN_REWARD + sqrt(2 * ln(parent_visits) / CHILD_VISITS)").unwrap();
        assert_eq!(
            e.canonical(),
            "(MEAN_REWARD + sqrt(((2 * ln(PARENT_VISITS)) / CHILD_VISITS)))"
        );
        assert_eq!(PolicyExpr::parse("a - b - c").unwrap_err().offset, 0);
        let e = PolicyExpr::parse("MAX_R - MIN_D_NPC - 1").unwrap();
        assert_eq!(e.canonical(), "((MAX_R - MIN_D_NPC) - 1)");
        assert!(PolicyExpr::parse("").is_err());
        assert!(PolicyExpr::parse("(MAX_R").is_err());
        assert!(PolicyExpr::parse("MAX_R MAX_R").is_err());
        assert!(PolicyExpr::parse("abs MAX_R").is_err());
        assert!(PolicyExpr::parse("1e999").is_err());
    }

    #[test]
    fn single_leaf_prunes_to_itself() {
        let v = PolicyExpr::var(Var::MinDNpc);
        assert_eq!(v.prunings(), vec![v.clone()]);
    }

    #[test]
    fn sum_of_leaves_prunes_three_ways() {
        let e = PolicyExpr::parse("MIN_D_MOV + MAX_R").unwrap();
        let got: Vec<String> = e.prunings().iter().map(|p| p.canonical()).collect();
        assert_eq!(got, vec!["MAX_R", "MIN_D_MOV", "(MIN_D_MOV + MAX_R)"]);
    }

    #[test]
    fn division_numerator_deletion_gives_reciprocal() {
        let e = PolicyExpr::parse("MAX_R / SUM_D_NPC").unwrap();
        let got: Vec<String> = e.prunings().iter().map(|p| p.canonical()).collect();
        assert_eq!(got, vec!["(1 / SUM_D_NPC)", "MAX_R", "(MAX_R / SUM_D_NPC)"]);
    }

    #[test]
    fn unary_disappears_with_operand() {
        let e = PolicyExpr::parse("abs(MAX_R) + MIN_D_NPC").unwrap();
        let got: Vec<String> = e.prunings().iter().map(|p| p.canonical()).collect();
        assert_eq!(got, vec!["MIN_D_NPC", "abs(MAX_R)", "(abs(MAX_R) + MIN_D_NPC)"]);
    }

    #[test]
    fn duplicates_are_removed() {
        let e = PolicyExpr::parse("MAX_R + MAX_R").unwrap();
        assert_eq!(e.prunings().len(), 2);
    }

    #[test]
    fn reference_has_fifteen_prunings() {
        assert_eq!(PolicyExpr::reference().prunings().len(), 15);
    }

    #[test]
    fn tree_policy_display() {
        assert_eq!(TreePolicy::Ucb { alpha: 2.0 }.to_string(), "ucb");
    }
}
