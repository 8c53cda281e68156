use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::solve::{solve_family, RpfFamily, RpfOptions};
use crate::error::{Error, Result};
use crate::map_zoo::Space;
use crate::transfer_op::{Grid, GridFunction, Transfer};

/// Subcells per grid cell used when pushing a measure forward.
pub const PUSH_SUBDIVISION: usize = 8;
/// Fourier modes tested by the weak pushforward residual.
pub const WEAK_MODES: usize = 8;

/// `μ_j = h_j ν_j` and `Π_j(0) = log λ_j(0)` on a window of fibers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsFamily {
    pub rpf: RpfFamily,
    /// Nodal probability weights, one vector per solved fiber.
    pub mu: Vec<Vec<f64>>,
    pub log_lambda: Vec<f64>,
}

impl GibbsFamily {
    pub fn grid(&self) -> Grid {
        self.rpf.grid
    }

    fn index(&self, j: i64) -> Result<usize> {
        let t = self.rpf.get(j)?;
        Ok((t.fiber - self.rpf.start) as usize)
    }

    pub fn mu(&self, j: i64) -> Result<&[f64]> {
        Ok(&self.mu[self.index(j)?])
    }

    pub fn pressure(&self, j: i64) -> Result<f64> {
        Ok(self.log_lambda[self.index(j)?])
    }

    pub fn h(&self, j: i64) -> Result<&GridFunction> {
        Ok(&self.rpf.get(j)?.h)
    }

    pub fn lambda(&self, j: i64) -> Result<f64> {
        Ok(self.rpf.get(j)?.lambda.re)
    }

    /// `μ_j(g)` for a grid function on fiber `j`.
    pub fn expect(&self, j: i64, g: &GridFunction) -> Result<Complex64> {
        Ok(g.integrate(self.mu(j)?))
    }

    /// `μ_j(f)` for a closed-form function.
    pub fn expect_fn(&self, j: i64, f: impl Fn(f64) -> f64) -> Result<f64> {
        let grid = self.grid();
        Ok(self.mu(j)?.iter().enumerate().map(|(k, m)| m * f(grid.node(k))).sum())
    }
}

/// Solve the `z = 0` triplets on `j0 .. j0 + len` and form the Gibbs weights.
pub fn gibbs_family(tr: &Transfer, j0: i64, len: usize, opts: &RpfOptions) -> Result<GibbsFamily> {
    let z = vec![Complex64::new(0.0, 0.0); tr.dim()];
    let rpf = solve_family(tr, j0, len, &z, opts)?;
    let mut mu = Vec::with_capacity(rpf.triplets.len());
    let mut log_lambda = Vec::with_capacity(rpf.triplets.len());
    for t in &rpf.triplets {
        let w: Vec<f64> = t.h.values.iter().zip(&t.nu).map(|(h, n)| (h * n).re).collect();
        if w.iter().any(|&x| x < -1e-14) {
            return Err(Error::Numeric(format!("negative Gibbs weight on fiber {}", t.fiber)));
        }
        let total: f64 = w.iter().sum();
        mu.push(w.into_iter().map(|x| x.max(0.0) / total).collect());
        log_lambda.push(t.lambda.re.ln());
    }
    Ok(GibbsFamily { rpf, mu, log_lambda })
}

/// Discrepancies between `(T_j)_* μ_j` and `μ_{j+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub fiber: i64,
    /// `Σ_k |push_k − μ_{j+1,k}|` over grid cells.
    pub l1: f64,
    /// `sup_b |F_push(b) − F_{μ_{j+1}}(b)|` over cell boundaries.
    pub cdf: f64,
    /// `max_k |μ_j(e_k∘T_j) − μ_{j+1}(e_k)|` over low Fourier modes `e_k`, `k ≤ 8`,
    /// with the nodal masses pushed as point masses. This is the headline
    /// residual: binning smears each mass over a cell and is only first order
    /// in the spacing, while the weak pairing is second order.
    pub weak: f64,
}

impl PushforwardReport {
    pub fn residual(&self) -> f64 {
        self.weak
    }
}

/// Push the nodal masses of `μ_j` forward by binning: every dual cell is split
/// into [`PUSH_SUBDIVISION`] subcells carrying equal shares of its mass, and
/// each subcell's image interval distributes its share over the target cells
/// in proportion to overlap.
pub fn pushforward_residual(tr: &Transfer, gibbs: &GibbsFamily, j: i64) -> Result<PushforwardReport> {
    let grid = tr.grid();
    let fiber = tr.system().fiber(j);
    let map = &fiber.map;
    let mu = gibbs.mu(j)?;
    let target = gibbs.mu(j + 1)?;
    let len = grid.len();
    let h = grid.spacing();
    let mut pushed = vec![0.0; len];
    // Target cells as intervals in [0, 1] (cell 0 on the circle wraps).
    let deposit = |pushed: &mut Vec<f64>, a: f64, b: f64, mass: f64| {
        if b <= a {
            pushed[nearest(grid, a)] += mass;
            return;
        }
        let first = ((a / h - 0.5).floor().max(0.0)) as usize;
        let last = (((b / h) + 0.5).ceil() as usize).min(grid.n);
        for k in first..=last {
            let (lo, hi) = (k as f64 * h - h / 2.0, k as f64 * h + h / 2.0);
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            if overlap > 0.0 {
                let idx = if k == grid.n && grid.space == Space::Circle { 0 } else { k.min(len - 1) };
                pushed[idx] += mass * overlap / (b - a);
            }
        }
    };
    for k in 0..len {
        if mu[k] == 0.0 {
            continue;
        }
        let (lo, hi) = grid.cell(k);
        let step = (hi - lo) / PUSH_SUBDIVISION as f64;
        let share = mu[k] / PUSH_SUBDIVISION as f64;
        for s in 0..PUSH_SUBDIVISION {
            let (u, v) = (lo + s as f64 * step, lo + (s + 1) as f64 * step);
            let (u, v) = (tr.system().space().wrap(u), tr.system().space().wrap(v));
            let v = if v < u { v + 1.0 } else { v };
            // Split subcells straddling a branch boundary.
            let mut cuts = vec![u];
            for b in map.branches() {
                for shift in [0.0, 1.0] {
                    let c = b.lo + shift;
                    if c > u && c < v {
                        cuts.push(c);
                    }
                }
            }
            cuts.push(v);
            for piece in cuts.windows(2) {
                let (p, q) = (piece[0], piece[1]);
                let mass = share * (q - p) / (v - u);
                let mid = 0.5 * (p + q);
                let i = map.branch_of(mid);
                let base = if mid >= 1.0 { 1.0 } else { 0.0 };
                let (tp, tq) = (map.forward_branch(i, p - base), map.forward_branch(i, q - base));
                deposit(&mut pushed, tp.min(tq), tp.max(tq), mass);
            }
        }
    }
    let l1: f64 = pushed.iter().zip(target).map(|(a, b)| (a - b).abs()).sum();
    let (mut fa, mut fb, mut cdf) = (0.0, 0.0, 0.0f64);
    for k in 0..len {
        fa += pushed[k];
        fb += target[k];
        cdf = cdf.max((fa - fb).abs());
    }
    let images: Vec<f64> = (0..len).map(|k| map.forward(grid.node(k))).collect();
    let mut weak = 0.0f64;
    for m in 1..=WEAK_MODES {
        let a: Complex64 = mu.iter().zip(&images).map(|(&p, &y)| p * mode(grid.space, m, y)).sum();
        let b: Complex64 = target.iter().enumerate().map(|(k, &p)| p * mode(grid.space, m, grid.node(k))).sum();
        weak = weak.max((a - b).norm());
    }
    Ok(PushforwardReport { fiber: j, l1, cdf, weak })
}

fn nearest(grid: Grid, x: f64) -> usize {
    let k = (x * grid.n as f64).round() as usize;
    match grid.space {
        Space::Circle => k % grid.n,
        Space::Interval => k.min(grid.n),
    }
}

fn mode(space: Space, k: usize, x: f64) -> Complex64 {
    use std::f64::consts::PI;
    match space {
        Space::Circle => Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x),
        Space::Interval => Complex64::new((PI * k as f64 * x).cos(), 0.0),
    }
}
