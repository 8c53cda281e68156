use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::ConeParams;
use crate::map_zoo::Space;
use crate::transfer_op::{Grid, GridFunction};

/// `s_{x,y,t,κ}(g) = κ g(t) − (g(x) − g(y)) / ρ(x, y)^α` at grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingFunctional {
    pub x: usize,
    pub y: usize,
    pub t: usize,
}

impl GeneratingFunctional {
    pub fn eval(&self, g: &GridFunction, params: &ConeParams) -> Complex64 {
        let rho = g.grid.node_distance(self.x, self.y).powf(params.alpha);
        params.kappa * g.values[self.t] - (g.values[self.x] - g.values[self.y]) / rho
    }
}

/// Cap on the number of `t` nodes crossed with every near-diagonal pair.
pub const MAX_T_NODES: usize = 256;

/// A sampled generating set: every ordered pair of adjacent nodes crossed
/// with a fixed set of `t` nodes, plus random triples.
///
/// Near-diagonal pairs are always present because for Hölder cones the
/// extremal ratios concentrate there.
#[derive(Clone, Debug)]
pub struct TripleSet {
    pub grid: Grid,
    /// Ordered pairs `(x, y, ρ(x, y)^{−α})`.
    pairs: Vec<(usize, usize, f64)>,
    t_nodes: Vec<usize>,
    random: Vec<(GeneratingFunctional, f64)>,
}

impl TripleSet {
    pub fn new(grid: Grid, alpha: f64, random_triples: usize, seed: u64) -> Self {
        let len = grid.len();
        let mut pairs = Vec::with_capacity(2 * len);
        let last = if grid.space == Space::Circle { len } else { len - 1 };
        for k in 0..last {
            let l = (k + 1) % len;
            let w = grid.node_distance(k, l).powf(-alpha);
            pairs.push((k, l, w));
            pairs.push((l, k, w));
        }
        let stride = len.div_ceil(MAX_T_NODES);
        let mut t_nodes: Vec<usize> = (0..len).step_by(stride).collect();
        if *t_nodes.last().unwrap() != len - 1 {
            t_nodes.push(len - 1);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut random = Vec::with_capacity(random_triples);
        while random.len() < random_triples {
            let (x, y, t) = (rng.random_range(0..len), rng.random_range(0..len), rng.random_range(0..len));
            if x != y {
                random.push((GeneratingFunctional { x, y, t }, grid.node_distance(x, y).powf(-alpha)));
            }
        }
        TripleSet { grid, pairs, t_nodes, random }
    }

    pub fn len(&self) -> usize {
        self.pairs.len() * self.t_nodes.len() + self.random.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Visit `(s(f), s(g))` for every triple in the set.
    pub fn for_each_pair_value(
        &self,
        f: &[Complex64],
        g: &[Complex64],
        kappa: f64,
        mut visit: impl FnMut(Complex64, Complex64),
    ) {
        let tf: Vec<Complex64> = self.t_nodes.iter().map(|&t| kappa * f[t]).collect();
        let tg: Vec<Complex64> = self.t_nodes.iter().map(|&t| kappa * g[t]).collect();
        for &(x, y, w) in &self.pairs {
            let (df, dg) = ((f[x] - f[y]) * w, (g[x] - g[y]) * w);
            for (a, b) in tf.iter().zip(&tg) {
                visit(a - df, b - dg);
            }
        }
        for &(s, w) in &self.random {
            visit(kappa * f[s.t] - (f[s.x] - f[s.y]) * w, kappa * g[s.t] - (g[s.x] - g[s.y]) * w);
        }
    }

    /// Visit `s(g)` for every triple, with the functional that produced it.
    pub fn for_each_value(&self, g: &[Complex64], kappa: f64, mut visit: impl FnMut(GeneratingFunctional, Complex64)) {
        for &(x, y, w) in &self.pairs {
            let d = (g[x] - g[y]) * w;
            for &t in &self.t_nodes {
                visit(GeneratingFunctional { x, y, t }, kappa * g[t] - d);
            }
        }
        for &(s, w) in &self.random {
            visit(s, kappa * g[s.t] - (g[s.x] - g[s.y]) * w);
        }
    }
}

/// Hilbert projective distance; the boundary case is a value, not an error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HilbertDistance {
    Finite(f64),
    Infinite,
}

impl HilbertDistance {
    pub fn value(self) -> f64 {
        match self {
            HilbertDistance::Finite(d) => d,
            HilbertDistance::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, HilbertDistance::Finite(_))
    }
}

/// `d(f, g) = log(β / α)` with `β`, `α` the largest and smallest of
/// `s(f)/s(g)` over the sampled generating set. A triple on which either
/// function vanishes or turns negative makes the distance infinite.
pub fn hilbert_distance(
    f: &GridFunction,
    g: &GridFunction,
    params: &ConeParams,
    triples: &TripleSet,
) -> HilbertDistance {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut boundary = false;
    triples.for_each_pair_value(&f.values, &g.values, params.kappa, |a, b| {
        if a.re <= 0.0 || b.re <= 0.0 {
            boundary = true;
            return;
        }
        let r = a.re / b.re;
        lo = lo.min(r);
        hi = hi.max(r);
    });
    if boundary || !(lo > 0.0) {
        return HilbertDistance::Infinite;
    }
    // Rounding can leave hi marginally below lo for proportional inputs.
    HilbertDistance::Finite((hi / lo).ln().max(0.0))
}
