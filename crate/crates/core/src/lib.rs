//! Reduced-order modelling of incompressible flow with Taylor–Hood finite elements.

pub mod analysis;
pub mod error;
pub mod fem;
pub mod fom;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod pod;
pub mod recovery;
pub mod rom;
pub mod scalar;
pub mod supremizer;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type SparseMatrix = linalg::CsrMatrix<f64>;
