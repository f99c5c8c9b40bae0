//! Benchmark harness for measuring how far game-playing agents agree with
//! each other when they watch the same playthrough.

pub mod agents;
pub mod analysis;
pub mod cli;
pub mod engine;
pub mod policy_expr;
pub mod shadowing;
