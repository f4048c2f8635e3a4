//! Numerical laboratory for first-order Hamilton-Jacobi equations driven by
//! piecewise-constant random fields and rough paths.
//!
//! The crate is organized bottom-up:
//!
//! - [`fields`]: step noise fields, their rescaled integral paths, and
//!   monotone-segment decompositions.
//! - [`hamiltonians`]: scalar building blocks (potentials, nonconvex fluxes),
//!   Legendre transforms, and structured Hamiltonian specifications.
//! - [`hjsolver`]: monotone finite-difference solvers, Hopf-Lax semigroups,
//!   and the action functional on grids.
//! - [`pathwise`]: solution operators along rough driving paths, built by
//!   splitting drivers into monotone segments.
//! - [`effective`]: cell problems, closed-form effective Hamiltonians,
//!   Walsh decompositions, and explicit correctors.
//! - [`ensemble`]: Monte Carlo sampling, splitting schemes for the limit
//!   equations, and convergence diagnostics.

pub mod effective;
pub mod ensemble;
pub mod error;
pub mod fields;
pub mod hamiltonians;
pub mod hjsolver;
pub mod pathwise;

pub use error::{Error, Result};
