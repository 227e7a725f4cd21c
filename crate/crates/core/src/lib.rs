//! Resolvent surrogates and source-independent greedy snapshot selection for
//! parametric elliptic problems.
//!
//! The crate is organized around five layers:
//!
//! - [`coeff_space`]: piecewise-constant coefficients on uniform grids and
//!   finite parametric families of them.
//! - [`resolvent1d`]: the exact resolvent of the 1D mixed problem
//!   `-(σ u')' = f`, `u'(0) = 0`, `u(1) = 0`, the multiply-the-primitive
//!   operator `T_m`, and the exact `‖·‖_*` distances between resolvents.
//! - [`minimax`]: L∞ best approximation of a vector by a span of columns,
//!   solved as a linear program, with a brute-force grid oracle.
//! - [`greedy`]: the weak greedy snapshot selection driven by the L∞ surrogate,
//!   and the online approximation of a new resolvent.
//! - [`stability_lab`]: P1 finite-element checks of the two-sided Lipschitz
//!   bound, the operator identity and the density identities in 1D and 2D.
//!
//! The [`cli`] module implements the `resgreedy` batch runner.

pub mod cli;
pub mod coeff_space;
mod error;
pub mod greedy;
pub mod minimax;
pub mod resolvent1d;
pub mod rng;
pub mod stability_lab;

pub use coeff_space::{FamilyKind, Generator, Grid, Grid1D, Grid2D, ParametricFamily, PiecewiseFn};
pub use error::{Error, Result};
pub use greedy::{GreedyConfig, GreedyResult, ScanMode, StopReason};
pub use minimax::{MinimaxProblem, MinimaxSolution};
pub use resolvent1d::{Solution1D, SourceFn};
