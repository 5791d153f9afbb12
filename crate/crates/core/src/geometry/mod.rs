//! Radial graphs `r(u)` over the flat torus inside a warped product, and
//! their discrete differential geometry.

mod dump;
mod grid;
mod jet;
mod laplace;
mod warp;

use thiserror::Error;

pub use dump::{dump_field, dump_field_to_path, parse_field, parse_field_from_path, FieldRow};
pub use grid::{graph_derivatives, node_derivatives, BaseGrid, NodeDerivatives, RadialGraphField};
pub use jet::{
    hypersurface_jet, jet_from_derivatives, jet_sweep, principal_curvatures, trace_identity_rhs,
    HypersurfaceJet,
};
pub use laplace::laplace_beltrami;
pub use warp::{adaptive_simpson, WarpKind, WarpProfile, WarpValues};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("r = {r} outside the warp domain ({lo}, {hi})")]
    Domain { r: f64, lo: f64, hi: f64 },
    #[error("invalid warp profile: {0}")]
    InvalidProfile(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite geometry at node {node}")]
    NonFiniteJet { node: usize },
    #[error("field file: {0}")]
    Io(#[from] std::io::Error),
    #[error("field file: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed field file at row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { row: usize, column: String },
}
