//! Affine differential geometry of codimension-two submanifolds lying in
//! hypersurfaces of affine space.

pub mod error;
pub mod envelope;
pub mod frame;
pub mod mesh;
pub mod scene;
pub mod singular;
pub mod transon;
pub mod curve;
pub mod expr;
pub mod jet;
pub mod linalg;
pub mod metricbundle;

pub use error::{Error, JetError, Result};
pub use expr::{eval_jet, eval_jet_rational, parse_expression, Expr};
pub use jet::Jet;
