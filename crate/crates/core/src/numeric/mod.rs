//! Linear algebra, quadrature and summation kernels used by the grid operators.

pub mod dense;
pub mod eigen;
pub mod quadrature;
pub mod sparse;
pub mod sum;

pub use dense::LuFactor;
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use sparse::{Csr, SparseSolver, DIRECT_SOLVE_LIMIT};
pub use sum::{compensated_sum, weighted_dot, Accumulator};
