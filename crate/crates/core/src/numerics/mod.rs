//! Shared numerical kernels: adaptive and fixed quadrature, Cholesky
//! factorization and the seed-derived Gaussian streams.

mod cholesky;
mod legendre;
mod quadrature;
mod random;

pub use cholesky::{cholesky, LowerTriangular};
pub use legendre::GaussLegendre;
pub use quadrature::{integrate_adaptive, integrate_adaptive_with_budget, QuadResult, DEFAULT_NODE_BUDGET};
pub use random::{gaussian_stream, standard_normal_quantile, GaussianStream};
