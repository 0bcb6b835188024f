//! Boundary crossing probabilities for (q,d)-Slepian processes
//!
//! A (q,d)-Slepian process is the centered stationary Gaussian process on
//! `[q, d]` with covariance `(1 - |t - s|/q)^+`, realised by the normalized
//! moving-window increment `(B_t - B_{t-q})/√q` of a Brownian motion. For
//! `d <= 2q` and a piecewise-affine boundary `g` this crate evaluates
//! `P(W_t > g(t) for some t ∈ [q, d])` by nested quadrature or Monte Carlo
//! over the values at the boundary knots, and checks the result with a
//! brute-force path simulator.
//!
//! All analytic code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod bridge;
pub mod engine;
pub mod error;
pub mod numerics;
pub mod oracle;
pub mod process;
pub mod scalar;

pub use boundary::{approximate, AffinePiece, ApproxMode, BoundaryFile, PiecewiseAffineBoundary};
pub use bridge::{hitting_density_double, hitting_density_single, noncross_affine, noncross_constant, BridgeSpec};
pub use engine::{bcp_montecarlo, bcp_nested, bcp_quadrature, theorem1_integrand, Estimate, Method, Partition};
pub use error::{Error, Result};
pub use oracle::{empirical_bcp, empirical_bridge_noncross, simulate_paths, SimConfig};
pub use process::{conditional_density, fdd_density, pair_density, GaussianVectorSpec, ProcessParams};
pub use scalar::Real;

pub type Params = ProcessParams<f64>;
pub type Boundary = PiecewiseAffineBoundary<f64>;
pub type Piece = AffinePiece<f64>;
pub type Bridge = BridgeSpec<f64>;
pub type Grid = Partition<f64>;
pub type Estimate64 = Estimate<f64>;
pub type VectorSpec = GaussianVectorSpec<f64>;
pub type Simulation = SimConfig<f64>;
