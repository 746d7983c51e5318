use thiserror::Error;

use crate::feasibility::FeasibilityCertificate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("network is not connected")]
    Disconnected,

    #[error("injections are not balanced: sum {sum:e} exceeds tolerance {tolerance:e}")]
    Unbalanced { sum: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("edge {edge}: |flow| = {flow} exceeds coupling {coupling}")]
    DomainViolation {
        edge: usize,
        flow: f64,
        coupling: f64,
    },

    #[error("edge {edge} is not a valid edge index (edge count {count})")]
    NoSuchEdge { edge: usize, count: usize },

    #[error("node {node} is not a valid node index (node count {count})")]
    NoSuchNode { node: usize, count: usize },

    #[error("flow is not a cycle flow: max |E f| = {residual:e}")]
    NotACycleFlow { residual: f64 },

    #[error("flow is not energy conserving: sum of nodal balances = {residual:e}")]
    NotConserving { residual: f64 },

    #[error("reference flow violates KCL: max |E f0 - p| = {residual:e}")]
    KclViolation { residual: f64 },

    #[error("winding number {value} on cycle {cycle} exceeds bound {bound}")]
    WindingOutOfBounds {
        cycle: usize,
        value: i64,
        bound: i64,
    },

    #[error("winding vector has length {found}, basis has {expected} cycles")]
    WindingLength { expected: usize, found: usize },

    #[error("enumeration would produce {count} winding vectors, cap is {cap}")]
    EnumerationCap { count: String, cap: u64 },

    #[error("flows violate the cycle condition on chord edge {edge}: residual {residual:e} rad")]
    CycleConditionViolated { edge: usize, residual: f64 },

    #[error("no flow satisfies KCL within line limits (max flow {max_flow} < {demand})", max_flow = .0.max_flow_value, demand = .0.total_source_power)]
    Infeasible(Box<FeasibilityCertificate>),

    #[error("no normal state with winding vector zero: solver ended on the boundary")]
    NoNormalState,

    #[error("network has {nodes} nodes, exhaustive partition check is limited to {limit}")]
    SizeLimit { nodes: usize, limit: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("case file is missing the `mpc.{0}` block")]
    MissingBlock(String),

    #[error("line {line}: reference to unknown bus {bus}")]
    UnknownBus { bus: i64, line: usize },

    #[error("branch {branch} has nonpositive reactance {x}")]
    NonpositiveReactance { branch: usize, x: f64 },

    #[error("invalid json")]
    Json(#[from] serde_json::Error),

    #[error("csv output failed")]
    Csv(#[from] csv::Error),

    #[error("numeric failure: {0}")]
    Numeric(String),
}
