//! Graph filters built from Chebyshev-U residual propagation.
//!
//! The crate covers graph loading and normalization, scalar polynomial
//! evaluation, an exact dense eigensolver used as a reference, the linear
//! propagation rules, a small reverse-mode autograd, the node-classification
//! models and a training loop.

pub mod autograd;
pub mod data;
pub mod error;
pub mod filters;
pub mod graph;
pub mod matrix;
pub mod models;
pub mod poly;
pub mod spectral;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{laplacian, normalized_adjacency, Graph, OperatorKind, PropagationOperator};
pub use matrix::{Matrix, SignalMatrix};
pub use poly::{Basis, CoeffVector};
