//! Sequential Ruelle–Perron–Frobenius triplets.
//!
//! For each fiber `j` the solver produces `λ_j(z)`, a function `h_j` and a
//! nodal functional `ν_j` with
//!
//! * `L_z^{(j)} h_j = λ_j h_{j+1}`,
//! * `(L_z^{(j)})^* ν_{j+1} = λ_j ν_j`,
//! * `ν_j(h_j) = ν_j(1) = 1`.
//!
//! At `z = 0` the products `μ_j = h_j ν_j` form an equivariant family of
//! probability measures, `(T_j)_* μ_j = μ_{j+1}`.

mod checks;
mod gibbs;
mod solve;

pub use checks::{
    check_conformal, check_decay_correlations, check_exp_convergence, stencil_check, ConformalReport, ConformalRow,
    DecayReport, StencilReport, NOISE_FLOOR,
};
pub use gibbs::{gibbs_family, pushforward_residual, GibbsFamily, PushforwardReport, PUSH_SUBDIVISION};
pub use solve::{solve_family, solve_rpf, Residuals, RpfFamily, RpfOptions, Triplet};
