use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Syntax error in the expression language, with a byte position into the
    /// offending source string.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// Evaluation left the real domain of a component function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear solve against the multiplication operator of a vector field
    /// failed: the operator is singular or too ill-conditioned at the point.
    #[error("not invertible: {0}")]
    NonInvertible(String),

    /// A candidate field failed the eventual-identity gate.
    #[error("not an eventual identity: characterization defect {defect:.3e} exceeds gate {gate:.3e}")]
    NotEventualIdentity { defect: f64, gate: f64 },

    /// A candidate field failed the Legendre (primitive) field gate.
    #[error("not a Legendre field: symmetry defect {defect:.3e} exceeds gate {gate:.3e}")]
    NotLegendre { defect: f64, gate: f64 },

    /// The bundle map X -> A_X(u) is not an isomorphism on this chart.
    #[error("bundle map is not an isomorphism: {0}")]
    NotIsomorphism(String),

    /// Rejection sampling could not find enough admissible points.
    #[error("sampling failed: {0}")]
    Sampling(String),

    /// Model construction or validation failure (named gate plus detail).
    #[error("model error: {0}")]
    Model(String),

    /// Model file schema violation.
    #[error("schema error: {0}")]
    Schema(String),

    /// Suite orchestration / configuration error.
    #[error("config error: {0}")]
    Config(String),
}
