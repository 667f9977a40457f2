//! Numerical laboratory for the differential geometry of closed surfaces
//! immersed in conformally rescaled Euclidean 3-space.
//!
//! The ambient space carries the metric `exp(sigma) <,>` for a user-supplied
//! scalar field `sigma`. The crate computes the ambient curvature two
//! independent ways, the full extrinsic/intrinsic geometry of parametric
//! closed surfaces, surface integrals and global identities, first variations
//! under normal deformations (with finite-difference oracles for every
//! analytic formula), and a Willmore gradient flow on a spectral surface
//! representation.
//!
//! Derivatives never come from divided differences in the main path: every
//! scalar is carried as a truncated Taylor jet ([`jet`]), so fourth-order
//! chart derivatives of an immersion are available to roundoff accuracy.

pub mod algebra;
pub mod ambient;
pub mod catalog;
pub mod error;
pub mod expr;
pub mod flow;
pub mod jet;
pub mod parallel;
pub mod quadrature;
pub mod sampling;
pub mod surface;
pub mod variation;

pub use error::{CslError, DomainError, ExprError, FlowError, GeomError};
pub use expr::{jet_eval, parse_field, FieldExpr, VarSpace};
pub use jet::{Jet, Jet2, JetShape, Scalar};
