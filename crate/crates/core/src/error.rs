//! Error types shared across the crate.

use thiserror::Error;

/// An elementary operation left its domain (log of a non-positive value,
/// division by a jet with zero constant term, ...).
#[derive(Debug, Clone, Error)]
#[error("domain error in {op}: {detail}")]
pub struct DomainError {
    pub op: &'static str,
    pub detail: String,
}

impl DomainError {
    pub fn new(op: &'static str, detail: impl Into<String>) -> Self {
        Self {
            op,
            detail: detail.into(),
        }
    }
}

/// Parsing or evaluating a scalar-field expression failed.
#[derive(Debug, Clone, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` is not available in a {space} expression")]
    VariableContext { name: &'static str, space: &'static str },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("non-finite coefficients produced by `{op}`")]
    NonFinite { op: &'static str },
}

/// Geometric evaluation failed at a chart point.
#[derive(Debug, Clone, Error)]
pub enum GeomError {
    #[error("irregular chart point (u, v) = ({u:.6}, {v:.6}): tangent Gram determinant {gram:.3e}")]
    IrregularPoint { u: f64, v: f64, gram: f64 },
    #[error("jet order {available} is too low: {what} needs order {needed}")]
    InsufficientOrder {
        available: usize,
        needed: usize,
        what: &'static str,
    },
    #[error("umbilic point: |lambda1 - lambda2| = {gap:.3e}, eigenvalue branches not separated")]
    UmbilicPoint { gap: f64 },
    #[error("evaluation failed at (u, v) = ({u:.6}, {v:.6}): {source}")]
    AtNode {
        u: f64,
        v: f64,
        #[source]
        source: Box<GeomError>,
    },
    #[error("varied immersion lost regularity at t = {t:.3e}")]
    VariedIrregular { t: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl GeomError {
    pub fn at_node(u: f64, v: f64, source: GeomError) -> Self {
        GeomError::AtNode {
            u,
            v,
            source: Box::new(source),
        }
    }
}

/// Spectral representation or flow stepping failed.
#[derive(Debug, Clone, Error)]
pub enum FlowError {
    #[error(
        "spectral projection rejected: reconstruction error {error:.3e} exceeds {limit:.3e}; raise the bandlimit"
    )]
    Aliasing { error: f64, limit: f64 },
    #[error("flow stalled at step {step}: step size underflow after {halvings} halvings")]
    Stall { step: usize, halvings: usize },
    #[error("bandlimit ({mu}, {mv}) exceeds the grid Nyquist limit for ({nu}, {nv}) nodes")]
    BandlimitTooHigh {
        mu: usize,
        mv: usize,
        nu: usize,
        nv: usize,
    },
    #[error("topology {0:?} is not supported by the spectral representation")]
    UnsupportedTopology(crate::surface::Topology),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Crate-level umbrella error.
#[derive(Debug, Clone, Error)]
pub enum CslError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
