//! Discretised transfer operators.
//!
//! `(L_z^{(j)} g)(x) = Σ_{T_j y = x} e^{φ_j(y) + z·u_j(y)} g(y)` is evaluated
//! by collocation: at every node of fiber `j + 1` the preimages are solved
//! once and `g` is interpolated linearly there. The resulting matrix is
//! sparse with `2d` entries per row; its transpose gives the action on
//! functionals. The Ulam discretisation in [`ulam`] is kept as an oracle.

mod grid;
pub mod io;
mod normalized;
mod norms;
mod operator;
pub mod ulam;

pub use grid::{holder_seminorm, project_mean, Grid, GridFunction, HOLDER_RANDOM_PAIRS, HOLDER_WINDOW};
pub use normalized::{Normalized, Step};
pub use norms::{op_norm_estimate, TrialSet, DEFAULT_TRIALS};
pub use operator::{FiberOperator, Scaled, Transfer, DEFAULT_RADIUS};
