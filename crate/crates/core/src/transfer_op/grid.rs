use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_zoo::Space;

/// Uniform grid on a fiber: `N + 1` nodes `k/N` on the interval, `N`
/// periodic nodes on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub space: Space,
    pub n: usize,
}

impl Grid {
    pub fn new(space: Space, n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!("grid resolution must be a power of two ≥ 4, got {n}")));
        }
        Ok(Grid { space, n })
    }

    /// Number of stored values.
    #[inline]
    pub fn len(&self) -> usize {
        match self.space {
            Space::Interval => self.n + 1,
            Space::Circle => self.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.node(k))
    }

    /// Interpolation stencil `(left, right, θ)` with `x ≈ (1 − θ) x_left + θ x_right`.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, usize, f64) {
        let nf = self.n as f64;
        match self.space {
            Space::Interval => {
                let u = x.clamp(0.0, 1.0) * nf;
                let k = (u.floor() as usize).min(self.n - 1);
                (k, k + 1, u - k as f64)
            }
            Space::Circle => {
                let u = x.rem_euclid(1.0) * nf;
                let k = (u.floor() as usize).min(self.n - 1);
                (k, (k + 1) % self.n, (u - k as f64).clamp(0.0, 1.0))
            }
        }
    }

    /// Distance between nodes `k` and `l`.
    #[inline]
    pub fn node_distance(&self, k: usize, l: usize) -> f64 {
        self.space.distance(self.node(k), self.node(l))
    }

    /// Quadrature weights (trapezoid on the interval, uniform on the circle).
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.len()];
        if self.space == Space::Interval {
            w[0] = h / 2.0;
            w[self.n] = h / 2.0;
        }
        w
    }

    /// Dual cell `[x_k − h/2, x_k + h/2]`, clipped to `[0, 1]` on the interval.
    /// On the circle the left end may be negative.
    pub fn cell(&self, k: usize) -> (f64, f64) {
        let (x, h) = (self.node(k), self.spacing());
        match self.space {
            Space::Interval => ((x - h / 2.0).max(0.0), (x + h / 2.0).min(1.0)),
            Space::Circle => (x - h / 2.0, x + h / 2.0),
        }
    }

    /// `|[a, b] ∩ cell_k| / |cell_k|`, with `[a, b] ⊂ [0, 1]`.
    pub fn cell_fraction(&self, k: usize, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.cell(k);
        let overlap = |lo: f64, hi: f64| (hi.min(b) - lo.max(a)).max(0.0);
        let mut m = overlap(lo, hi);
        if self.space == Space::Circle {
            m += overlap(lo + 1.0, hi + 1.0) + overlap(lo - 1.0, hi - 1.0);
        }
        m / (hi - lo)
    }
}

/// A complex function sampled on a fiber grid and extended by linear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub fiber: i64,
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(fiber: i64, grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        Ok(GridFunction { fiber, grid, values })
    }

    pub fn constant(fiber: i64, grid: Grid, c: Complex64) -> Self {
        GridFunction { fiber, grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(fiber: i64, grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        GridFunction { fiber, grid, values: grid.nodes().map(f).collect() }
    }

    pub fn from_real(fiber: i64, grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        GridFunction { fiber, grid, values: grid.nodes().map(|x| Complex64::new(f(x), 0.0)).collect() }
    }

    pub fn from_real_values(fiber: i64, grid: Grid, v: &[f64]) -> Result<Self> {
        GridFunction::new(fiber, grid, v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation; exact at nodes.
    #[inline]
    pub fn eval(&self, x: f64) -> Complex64 {
        let (l, r, t) = self.grid.locate(x);
        self.values[l] * (1.0 - t) + self.values[r] * t
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn min_re(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(v.re))
    }

    pub fn max_re(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.re))
    }

    pub fn max_im(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Estimated Hölder seminorm `v(g)`; see [`holder_seminorm`].
    pub fn seminorm(&self, alpha: f64) -> f64 {
        holder_seminorm(self, alpha)
    }

    /// `‖g‖ = ‖g‖_∞ + v(g)`.
    pub fn norm(&self, alpha: f64) -> f64 {
        self.sup_norm() + self.seminorm(alpha)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        GridFunction { fiber: self.fiber, grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        GridFunction {
            fiber: self.fiber,
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn with_fiber(mut self, fiber: i64) -> Self {
        self.fiber = fiber;
        self
    }

    /// `Σ_k w_k g_k` for a discrete functional `w`.
    pub fn pair(&self, w: &[Complex64]) -> Complex64 {
        self.values.iter().zip(w).map(|(g, w)| g * w).sum()
    }

    /// `Σ_k μ_k g_k` for real weights.
    pub fn integrate(&self, mu: &[f64]) -> Complex64 {
        self.values.iter().zip(mu).map(|(g, m)| g * m).sum()
    }
}

/// Node offsets scanned exhaustively by the seminorm estimator.
pub const HOLDER_WINDOW: usize = 64;
/// Seeded long-range pairs added to the window.
pub const HOLDER_RANDOM_PAIRS: usize = 512;

/// Precomputed pair set of the Hölder estimator for one `(grid, α)`.
struct HolderPlan {
    window: Vec<(usize, f64)>,
    pairs: Vec<(usize, usize, f64)>,
}

impl HolderPlan {
    fn build(grid: Grid, alpha: f64) -> Self {
        let len = grid.len();
        let window = (1..=HOLDER_WINDOW.min(len - 1)).map(|m| (m, grid.node_distance(0, m).powf(-alpha))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ grid.n as u64);
        let mut pairs = Vec::with_capacity(HOLDER_RANDOM_PAIRS);
        while pairs.len() < HOLDER_RANDOM_PAIRS {
            let (k, l) = (rng.random_range(0..len), rng.random_range(0..len));
            let d = grid.node_distance(k, l);
            if d > 0.0 {
                pairs.push((k, l, d.powf(-alpha)));
            }
        }
        HolderPlan { window, pairs }
    }

    fn plan(grid: Grid, alpha: f64) -> Arc<HolderPlan> {
        type Plans = Mutex<HashMap<(Grid, u64), Arc<HolderPlan>>>;
        static PLANS: OnceLock<Plans> = OnceLock::new();
        let plans = PLANS.get_or_init(Default::default);
        let key = (grid, alpha.to_bits());
        if let Some(p) = plans.lock().expect("plan cache").get(&key) {
            return p.clone();
        }
        let p = Arc::new(HolderPlan::build(grid, alpha));
        plans.lock().expect("plan cache").insert(key, p.clone());
        p
    }
}

/// Lower estimate of `v(g) = sup |g(x) − g(y)| / ρ(x, y)^α` over the pairs
/// of all nodes within [`HOLDER_WINDOW`] offsets plus [`HOLDER_RANDOM_PAIRS`]
/// fixed random pairs.
///
/// The pair set depends only on `(grid, α)`, so every check compares like
/// with like. For `α = 1` and grid-linear functions the window alone is
/// exact because difference quotients peak between neighbours.
pub fn holder_seminorm(g: &GridFunction, alpha: f64) -> f64 {
    holder_seminorm_values(g.grid, &g.values, alpha)
}

pub(crate) fn holder_seminorm_values(grid: Grid, v: &[Complex64], alpha: f64) -> f64 {
    let plan = HolderPlan::plan(grid, alpha);
    let len = v.len();
    let circle = grid.space == Space::Circle;
    let mut best = 0.0f64;
    for &(m, inv) in &plan.window {
        let diff_max =
            |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm_sqr()));
        let mut local = diff_max(&v[..len - m], &v[m..]);
        if circle {
            local = local.max(diff_max(&v[len - m..], &v[..m]));
        }
        best = best.max(local.sqrt() * inv);
    }
    for &(k, l, inv) in &plan.pairs {
        best = best.max((v[k] - v[l]).norm() * inv);
    }
    best
}

/// `M_j g = μ_j(g) · 1`.
pub fn project_mean(g: &GridFunction, mu: &[f64]) -> Result<GridFunction> {
    if mu.len() != g.len() {
        return Err(Error::Parameter(format!("weight vector has length {}, grid has {}", mu.len(), g.len())));
    }
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > 1e-9 || mu.iter().any(|&m| m < -1e-15) {
        return Err(Error::Parameter(format!("mean weights must be a probability vector (total {total})")));
    }
    Ok(GridFunction::constant(g.fiber, g.grid, g.integrate(mu)))
}
