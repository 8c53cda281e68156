use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_zoo::{compute_s, SequentialSystem};
use crate::transfer_op::{holder_seminorm, Grid, GridFunction};

/// Parameters of the real cone `C_κ = {g > 0 : v(g) ≤ κ inf g}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub kappa: f64,
    pub alpha: f64,
    /// Target contraction `ζ = s(1 + δ)`.
    pub zeta: f64,
    pub delta_slack: f64,
}

impl ConeParams {
    /// Free-standing parameters, e.g. for arithmetic checks that involve no system.
    pub fn new(kappa: f64, alpha: f64, zeta: f64, delta_slack: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Parameter(format!("κ must be positive, got {kappa}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!("α must lie in (0, 1], got {alpha}")));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::Parameter(format!("ζ must lie in (0, 1), got {zeta}")));
        }
        if !(delta_slack > 0.0) {
            return Err(Error::Parameter(format!("δ must be positive, got {delta_slack}")));
        }
        Ok(ConeParams { kappa, alpha, zeta, delta_slack })
    }

    /// Derive `(δ, ζ, κ)` from a system.
    ///
    /// `δ` defaults to `(1/s − 1)/2` (half the room left by `s`), so
    /// `ζ = s(1 + δ) = (1 + s)/2`. `κ` defaults to
    /// `max(1, 10 · sup_j v(φ_j) / ln(1 + δ))`. An explicit `κ` must satisfy
    /// `sup_j v(φ_j) < κ δ`.
    pub fn for_system(system: &SequentialSystem, grid: Grid, kappa: Option<f64>, delta: Option<f64>) -> Result<Self> {
        let s = compute_s(system);
        if !s.below_one {
            return Err(Error::Precondition(format!("contraction factor s = {} is not below 1", s.s)));
        }
        let delta = delta.unwrap_or((1.0 / s.s - 1.0) / 2.0);
        let zeta = s.s * (1.0 + delta);
        if !(delta > 0.0 && zeta < 1.0) {
            return Err(Error::Parameter(format!("δ = {delta} gives ζ = {zeta}, need δ > 0 and ζ < 1")));
        }
        let alpha = system.alpha();
        let v_phi = potential_seminorm(system, grid);
        let kappa = kappa.unwrap_or_else(|| (10.0 * v_phi / (1.0 + delta).ln()).max(1.0));
        if !(v_phi < kappa * delta) {
            return Err(Error::Precondition(format!(
                "κ = {kappa} too small: sup v(φ) = {v_phi} must be below κδ = {}",
                kappa * delta
            )));
        }
        ConeParams::new(kappa, alpha, zeta, delta)
    }

    /// Same parameters with the cone opening scaled, `κ → factor · κ`.
    pub fn scaled(&self, factor: f64) -> Self {
        ConeParams { kappa: self.kappa * factor, ..*self }
    }
}

/// `sup_j v(φ_j)` over the system window, measured on `grid`.
pub fn potential_seminorm(system: &SequentialSystem, grid: Grid) -> f64 {
    system
        .window()
        .map(|j| {
            let f = system.fiber(j);
            let phi = GridFunction::from_real(j, grid, |x| f.potential.eval(&f.map, x));
            holder_seminorm(&phi, system.alpha())
        })
        .fold(0.0, f64::max)
}

/// Membership verdict and margin `κ inf g − v(g)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub margin: f64,
    pub inf: f64,
    pub seminorm: f64,
}

/// Decide `g > 0` and `v(g) ≤ κ inf g` for a real grid function.
pub fn cone_member(g: &GridFunction, params: &ConeParams) -> Membership {
    let inf = g.min_re();
    let seminorm = holder_seminorm(g, params.alpha);
    let margin = params.kappa * inf - seminorm;
    // Relative slack absorbs roundoff in functions built exactly on the boundary.
    let slack = 1e-12 * (params.kappa * inf.abs()).max(seminorm);
    let real = g.max_im() == 0.0;
    Membership { member: real && inf > 0.0 && margin >= -slack, margin, inf, seminorm }
}

/// Bumps per sample, at most.
const MAX_BUMPS: usize = 6;
/// Fraction of the cone opening used by sampled members.
pub const SAMPLE_FILL: f64 = 0.9;

/// `count` members of `C_κ`: sample 0 is the constant `1`, the rest are
/// `c (1 + λ Σ a_k b_k)` with Gaussian bumps `b_k`, scaled so that
/// `v(g) ≤ 0.9 κ inf g`. Deterministic in `seed`.
pub fn sample_cone(grid: Grid, fiber: i64, params: &ConeParams, count: usize, seed: u64) -> Vec<GridFunction> {
    sample_subcone(grid, fiber, params, 1.0, count, seed)
}

/// Members of the narrower cone `C_{ratio·κ}`, built like [`sample_cone`].
pub fn sample_subcone(
    grid: Grid,
    fiber: i64,
    params: &ConeParams,
    ratio: f64,
    count: usize,
    seed: u64,
) -> Vec<GridFunction> {
    let target = params.scaled(ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(GridFunction::constant(fiber, grid, 1.0.into()));
    }
    while out.len() < count {
        if let Some(g) = draw(grid, fiber, &target, &mut rng) {
            out.push(g);
        }
    }
    out
}

fn draw(grid: Grid, fiber: i64, params: &ConeParams, rng: &mut ChaCha8Rng) -> Option<GridFunction> {
    let k = rng.random_range(1..=MAX_BUMPS);
    let bumps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.02f64..0.3)))
        .collect();
    let space = grid.space;
    let shape = GridFunction::from_real(fiber, grid, |x| {
        bumps.iter().map(|&(a, c, w)| a * (-(space.distance(x, c) / w).powi(2)).exp()).sum()
    });
    let v = holder_seminorm(&shape, params.alpha);
    if v == 0.0 {
        return None;
    }
    // Fill fractions cluster towards the boundary so the samples probe it.
    let fill = SAMPLE_FILL * rng.random::<f64>().cbrt();
    let lo = shape.min_re();
    // λ v = fill κ (1 + λ lo)  ⇒  λ = fill κ / (v − fill κ lo).
    let denom = v - fill * params.kappa * lo;
    if denom <= 0.0 {
        return None;
    }
    let lambda = fill * params.kappa / denom;
    let c = (rng.random_range(-0.7f64..0.7)).exp();
    let g = shape.map(|b| c * (1.0 + lambda * b));
    let m = cone_member(&g, params);
    (m.member && m.seminorm <= SAMPLE_FILL * params.kappa * m.inf * (1.0 + 1e-12)).then_some(g)
}
