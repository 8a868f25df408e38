//! Taylor–Hood P2/P1 finite elements.

pub mod assembly;
pub mod dirichlet;
pub mod element;
pub mod quadrature;
pub mod saddle;
pub mod solve;
pub mod space;

pub use assembly::{
    apply_block_diag2, apply_convection, assemble_advective_gradient, assemble_curl_boundary, assemble_load,
    assemble_load_gradient, assemble_operators, assemble_scalar_load, block_diag2, edge_frame, l2_error_scalar,
    l2_error_vector, AssembledOperators, ConvectionAssembler, ScalarPattern,
};
pub use dirichlet::{constrain_dirichlet, ConstrainedSystem, Constraint};
pub use saddle::{SaddleSolution, SaddleSystem};
pub use solve::{solve_linear, Factored, LinearSolverSpec, SolverMethod};
pub use space::{FeSpace, SpaceKind};
