//! Chart-based tensor calculus for F-manifolds.
//!
//! Everything happens on a single real-analytic chart: a box in `R^n` with
//! exclusion margins. Component functions are arithmetic expressions over the
//! chart coordinates; evaluation produces exact derivative jets up to third
//! order, so theorem residuals can be held to `1e-9` tolerances without
//! finite-difference noise.
//!
//! The crate is organized around the objects of the theory:
//!
//! * [`expr`] — the expression language (parser, printer, exact symbolic
//!   differentiation),
//! * [`jet`] — truncated Taylor jets and their arithmetic (the evaluation
//!   backend for every field),
//! * [`domain`] — chart boxes with deterministic low-discrepancy sampling,
//! * [`field`] — scalar/vector/multiplication/connection fields over a chart,
//! * [`algebra`] — the multiplication algebra: products, inverses, Lie
//!   derivatives of the multiplication, eventual identities, dual
//!   multiplications,
//! * [`conn`] — torsion, curvature, compatibility, special families, dual
//!   (second structure) connections, flatness transport, Legendre
//!   transformations,
//! * [`pullback`] — induced multiplications and pull-back connections from
//!   external-bundle data,
//! * [`models`] — built-in geometries (semisimple charts, prepotential
//!   models, the kappa-deformed family),
//! * [`verify`] — model files, check suites, and machine-readable reports.
//!
//! The math core is generic over the scalar type through [`scalar::Real`];
//! concrete `f64` aliases are exported at the crate root.

pub mod algebra;
pub mod conn;
pub mod domain;
pub mod error;
pub mod expr;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod models;
pub mod pullback;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Jets over `f64`, the scalar type used by the CLI and the built-in models.
pub type Jet64 = jet::Jet<f64>;
pub type ScalarField64 = field::ScalarField<f64>;
pub type VectorField64 = field::VectorField<f64>;
pub type MultField64 = field::MultField<f64>;
pub type ConnField64 = field::ConnField<f64>;
pub type EndoField64 = field::EndoField<f64>;
pub type Model64 = models::Model<f64>;
pub type ChartDomain64 = domain::ChartDomain<f64>;
pub type SpecialFamily64 = conn::SpecialFamily<f64>;
