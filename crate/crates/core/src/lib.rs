//! Quantum-inspired linear-system solving with sample and query access.
//!
//! Given sample/query access to a dense `A` ([`SqMatrix`]) and a consistent
//! right-hand side `b`, [`solver::solve`] runs a row- and column-sub-sampled
//! stochastic gradient iteration on a sparse dual vector `y`. The result,
//! a [`CompressedSolution`], represents `x = Aᵀy ≈ A⁺b` and answers entry
//! queries and draws from `Pr[j] = x_j² / ‖x‖²` without forming `x`.
//!
//! [`reference`] holds the independent oracles (exact solves, gradient
//! descent, randomized Kaczmarz with averaging, exact moment enumeration) and
//! [`problems`] generates test systems with a prescribed spectrum.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod mtx;
pub mod outaccess;
pub mod problems;
pub mod reference;
pub mod rng;
pub mod sampling;
pub mod solver;
pub mod sqmatrix;

pub use error::{Error, Result};
pub use outaccess::{CompressedSolution, SampleStats};
pub use rng::RandomStream;
pub use solver::{BatchDraw, SolverParams, SparseIterate};
pub use sqmatrix::SqMatrix;
