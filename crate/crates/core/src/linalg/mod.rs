//! Dense and sparse linear algebra kernels.

pub mod cg;
pub mod cholesky;
pub mod dense;
pub mod eigen;
pub mod lu;
pub mod power;
pub mod sparse;
pub mod sparse_lu;

pub use cg::{pcg, CgOptions, CgOutcome};
pub use cholesky::Cholesky;
pub use dense::{axpy, dot, norm2, scaled, sub, DenseMatrix};
pub use eigen::{generalized_symmetric_eigen, jacobi_eigen, singular_values, symmetric_eigen, SymmetricEigen};
pub use lu::DenseLu;
pub use power::{power_iteration, PowerOutcome};
pub use sparse::{CsrMatrix, TripletBuilder};
pub use sparse_lu::{SparseLu, SparseLuPattern};
