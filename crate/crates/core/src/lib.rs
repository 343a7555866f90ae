//! Numerical core for quantitative stochastic homogenization on lattices.
//!
//! Everything here is pure computation over `alloc` containers: random
//! conductance fields, discrete calculus on tori and Dirichlet boxes, sparse
//! solvers, correctors and flux correctors, Dirichlet boundary correctors,
//! Green functions with their two-scale expansion, and the statistics used
//! to turn annealed bounds into fitted decay exponents.
//!
//! Coordinates are always the blown-up lattice ones: the lattice spacing is
//! the correlation length of the coefficients and a domain of side `L`
//! corresponds to the macroscopic scale `1/L` of the oscillation parameter.
//! Under `Psi(y) = Phi(eps y) / eps`, gradients are unchanged, which is how
//! the macroscopic bounds translate into the lattice statements tested here.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod boundary;
pub mod corrector;
pub mod ensemble;
pub mod error;
pub mod green;
pub mod lattice;
pub mod solver;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
