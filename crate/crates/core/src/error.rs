use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: String,
        found: String,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} has {nodes} nodes; second-order differencing needs at least 3")]
    TooFewNodes { axis: usize, nodes: usize },

    #[error("{what} evaluator failed{} (a = {location:?}): {reason}", at_node(*.node))]
    Evaluation {
        what: &'static str,
        node: Option<usize>,
        location: Vec<f64>,
        reason: String,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error(
        "parameter variation is not divergence-free: |div δa| = {divergence:e} at node {node} \
         (a = {location:?}) exceeds tolerance {tolerance:e}"
    )]
    NotDivergenceFree {
        node: usize,
        location: Vec<f64>,
        divergence: f64,
        tolerance: f64,
    },

    #[error("immersion impossible: parameter dimension p = {p} exceeds configuration dimension m = {m}")]
    ImmersionImpossible { p: usize, m: usize },

    #[error("matrix is not antisymmetric: max |W + Wᵀ| = {residual:e}")]
    NotAntisymmetric { residual: f64 },

    #[error("kinematic inconsistency: RᵀṘ deviates from antisymmetry by {residual:e}")]
    KinematicInconsistency { residual: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },
}

impl Error {
    pub(crate) fn dimension(
        context: impl Into<String>,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

fn at_node(node: Option<usize>) -> String {
    node.map(|n| format!(" at node {n}")).unwrap_or_default()
}
