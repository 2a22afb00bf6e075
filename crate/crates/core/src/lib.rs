//! Convex relaxation of multi-dimensional labeling problems whose regularizer
//! acts on the Laplacian of the labeling.
//!
//! A non-convex energy `sum_i rho(X^i, u_i) + eta((Lap u)_i)` over functions
//! from an image grid into a triangulated label space is replaced by a convex
//! saddle-point problem over fields of probability measures on the labels.
//! The crate assembles that problem ([`lifting::SaddleProblem`]), solves it
//! with an adaptive primal-dual method ([`solver`]), rounds the lifted result
//! back to a function ([`rounding`]) and drives image registration on top
//! ([`registration`]).

pub mod arrayio;
pub mod cli;
pub mod config;
pub mod domain;
pub mod energies;
pub mod error;
pub mod labelspace;
pub mod lifting;
pub mod prox;
pub mod registration;
pub mod rounding;
pub mod solver;
pub mod verify;

pub use domain::Grid;
pub use energies::{DataTerm, Regularizer, RegularizerKind};
pub use error::{Error, Result};
pub use labelspace::Triangulation;
pub use lifting::{DualVars, LiftedField, SaddleProblem};
pub use solver::{pdhg_solve, SolverConfig};
