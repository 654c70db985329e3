use thiserror::Error;

use crate::acd::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("illegal generator spec: {0}")]
    IllegalSpec(String),

    #[error("graph is not Delta-colorable: {0}")]
    NotColorable(String),

    #[error("edge ({}, {}) carried {bits} bits, budget is {budget}", .edge.0, .edge.1)]
    BudgetExceeded { edge: (u32, u32), bits: u32, budget: u32 },

    #[error("node {from} sent to non-neighbor {to}")]
    NotNeighbor { from: u32, to: u32 },

    #[error("eps * Delta / 4 < 1 (eps = {eps}, Delta = {delta})")]
    DeltaTooSmall { eps: f64, delta: usize },

    #[error("decomposition failed: {0}")]
    DecompositionFailed(String),

    #[error("decomposition violates {} invariant(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvariantViolated(Vec<Violation>),

    #[error("level order violated: AC {ac} (level {level}) has its special node in AC {host} (level {host_level})")]
    LevelOrderViolated { ac: usize, level: String, host: usize, host_level: String },

    #[error("matching of AC {ac} has size {size}, need {need}")]
    MatchingTooSmall { ac: usize, size: usize, need: f64 },

    #[error("node {0} violates the deg+1 list condition")]
    NotD1lc(u32),

    #[error("d1LC did not finish within {0} iterations")]
    D1lcStalled(usize),

    #[error("pair ({}, {}) has no relay", .0.0, .0.1)]
    RelayUnavailable((u32, u32)),

    #[error("node {0} is neither gray nor grayish")]
    NotGraytone(u32),

    #[error("virtual pair graph has degree {max}, bound {bound}")]
    DegreeBoundViolated { max: usize, bound: f64 },

    #[error("resampling stopped after {iterations} iterations with {} violated events", .violating.len())]
    IterationCapExceeded { iterations: usize, violating: Vec<usize> },

    #[error("slack generation failed for {} node(s)", .0.len())]
    SlackFailed(Vec<u32>),

    #[error("no x-candidate for AC {0}")]
    NoCandidate(usize),

    #[error("pair formation failed: {0}")]
    PairFormationFailed(String),

    #[error("structural assert failed: {0}")]
    Structural(String),
}
