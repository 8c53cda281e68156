//! Pressure, covariance and the imaginary-parameter operator estimates.
//!
//! Everything here works on the normalised operators built from the
//! `z = 0` Gibbs family, so `Π_{j,n}(0) = 0` and observables are centred
//! fiber by fiber. Covariances are computed two ways: exactly on the grid
//! by transporting pair correlations through `L̃`, and as finite-difference
//! Hessians of the pressure; their agreement is itself a check.

mod covariance;
mod growth;
mod norm_decay;
mod pressure;

pub use covariance::{check_cov_hessian, covariance_curve, CovHessianReport, CovHessianRow, CovMode, CovarianceCurve};
pub use growth::{stability_scan, variance_growth_check, GrowthCell, GrowthReport, StabilityReport};
pub use norm_decay::{characteristic, norm_decay_scan, NormDecayConfig, NormDecayReport, NormDecayRow};
pub use pressure::{
    pressure, pressure_block, pressure_blocks, taylor_remainders, PressureBlock, PressureOptions, PressureSampler,
};

/// Default admissible radius `r₀` for imaginary parameters.
pub const DEFAULT_R0: f64 = 0.2;
