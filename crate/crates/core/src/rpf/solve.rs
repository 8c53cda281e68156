use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_zoo::Space;
use crate::transfer_op::{Grid, GridFunction, Transfer};

/// Iteration controls for the triplet solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpfOptions {
    /// Number of fibers iterated through before the requested window.
    pub depth: usize,
    /// Largest accepted two-start discrepancy.
    pub tol: f64,
    /// Periodic systems stop once successive period-iterates agree to this.
    pub early_exit: f64,
}

impl Default for RpfOptions {
    fn default() -> Self {
        RpfOptions { depth: 40, tol: 1e-8, early_exit: 1e-12 }
    }
}

impl RpfOptions {
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖L h_j − λ_j h_{j+1}‖_∞ / ‖h_{j+1}‖_∞`
    pub eigen: f64,
    /// `‖L^* ν_{j+1} − λ_j ν_j‖_1`
    pub adjoint: f64,
    /// `|ν_j(h_j) − 1|`
    pub nu_h: f64,
    /// `|ν_j(1) − 1|`
    pub nu_one: f64,
    /// Discrepancy between two differently started iterations.
    pub convergence: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.eigen.max(self.adjoint).max(self.nu_h).max(self.nu_one).max(self.convergence)
    }
}

/// `(λ_j(z), h_j^{(z)}, ν_j^{(z)})` for one fiber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub fiber: i64,
    pub z: Vec<Complex64>,
    pub lambda: Complex64,
    pub h: GridFunction,
    /// Nodal weights: `ν(g) = Σ_k ν_k g(x_k)`.
    pub nu: Vec<Complex64>,
    pub residuals: Residuals,
}

impl Triplet {
    pub fn nu_of(&self, g: &GridFunction) -> Complex64 {
        g.pair(&self.nu)
    }
}

/// Triplets for a consecutive window of fibers. For periodic systems the
/// window is one full period and lookups wrap around.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpfFamily {
    pub z: Vec<Complex64>,
    pub start: i64,
    pub period: Option<usize>,
    pub grid: Grid,
    pub triplets: Vec<Triplet>,
}

impl RpfFamily {
    fn index(&self, j: i64) -> Option<usize> {
        match self.period {
            Some(p) => Some((j - self.start).rem_euclid(p as i64) as usize),
            None => {
                let i = j - self.start;
                (0..self.triplets.len() as i64).contains(&i).then_some(i as usize)
            }
        }
    }

    pub fn covers(&self, j: i64) -> bool {
        self.index(j).is_some()
    }

    pub fn get(&self, j: i64) -> Result<&Triplet> {
        self.index(j)
            .map(|i| &self.triplets[i])
            .ok_or_else(|| Error::Parameter(format!("fiber {j} is outside the solved window")))
    }

    /// `Σ_{k<n} log λ_{j+k}` (principal logs).
    pub fn log_lambda_sum(&self, j: i64, n: usize) -> Result<Complex64> {
        (0..n as i64).map(|k| self.get(j + k).map(|t| t.lambda.ln())).sum()
    }

    pub fn max_residual(&self) -> f64 {
        self.triplets.iter().map(|t| t.residuals.max()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.z.iter().all(|z| z.im == 0.0)
    }
}

fn second_start(grid: Grid, fiber: i64) -> GridFunction {
    match grid.space {
        Space::Circle => GridFunction::from_real(fiber, grid, |x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).cos()),
        Space::Interval => GridFunction::from_real(fiber, grid, |x| 0.5 + x),
    }
}

fn normalise(v: &mut [Complex64]) {
    let s: Complex64 = v.iter().sum();
    let s = if s.norm() > 1e-300 {
        s
    } else {
        v.iter().fold(Complex64::new(0.0, 0.0), |m, x| if x.norm() > m.norm() { *x } else { m })
    };
    if s.norm() > 0.0 {
        let inv = 1.0 / s;
        v.iter_mut().for_each(|x| *x *= inv);
    }
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.norm())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm())) / scale
}

fn l1_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum()
}

/// Forward iteration of two starts from `first` up to `target`; returns
/// the iterates at `target` and the convergence diagnostic.
fn forward_iterate(
    tr: &Transfer,
    z: &[Complex64],
    first: i64,
    target: i64,
    period: Option<usize>,
    early_exit: f64,
) -> Result<(Vec<Complex64>, f64)> {
    let grid = tr.grid();
    let mut a = vec![Complex64::new(1.0, 0.0); grid.len()];
    let mut b = second_start(grid, first).values;
    normalise(&mut a);
    normalise(&mut b);
    let mut checkpoint: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
    let mut f = first;
    while f < target {
        let (op, w) = tr.weighted(f, z)?;
        a = op.apply_weighted(&w, &a);
        b = op.apply_weighted(&w, &b);
        normalise(&mut a);
        normalise(&mut b);
        f += 1;
        if let Some(p) = period {
            if (target - f).rem_euclid(p as i64) == 0 {
                if let Some((pa, pb)) = &checkpoint {
                    if sup_diff(&a, pa).max(sup_diff(&b, pb)) < early_exit {
                        break;
                    }
                }
                checkpoint = Some((a.clone(), b.clone()));
            }
        }
    }
    let disc = sup_diff(&a, &b);
    Ok((a, disc))
}

/// Adjoint iteration from `last` down to `target`.
fn adjoint_iterate(
    tr: &Transfer,
    z: &[Complex64],
    last: i64,
    target: i64,
    period: Option<usize>,
    early_exit: f64,
) -> Result<(Vec<Complex64>, f64)> {
    let grid = tr.grid();
    let n = grid.len();
    let mut a = vec![Complex64::new(1.0 / n as f64, 0.0); n];
    let mut b: Vec<Complex64> = second_start(grid, last).values;
    normalise(&mut b);
    let mut checkpoint: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
    let mut f = last;
    while f > target {
        let (op, w) = tr.weighted(f - 1, z)?;
        a = op.adjoint_weighted(&w, &a);
        b = op.adjoint_weighted(&w, &b);
        normalise(&mut a);
        normalise(&mut b);
        f -= 1;
        if let Some(p) = period {
            if (f - target).rem_euclid(p as i64) == 0 {
                if let Some((pa, pb)) = &checkpoint {
                    if l1_diff(&a, pa).max(l1_diff(&b, pb)) < early_exit {
                        break;
                    }
                }
                checkpoint = Some((a.clone(), b.clone()));
            }
        }
    }
    let disc = l1_diff(&a, &b);
    Ok((a, disc))
}

/// Solve the triplets on fibers `j0 .. j0 + len` (one period for periodic systems).
///
/// `h` comes from forward iteration of `L_z` started `depth` fibers before
/// `j0`, `ν` from the transposed iteration started `depth` fibers after the
/// window. Both are run from two different starts; their discrepancy is the
/// convergence residual. Normalisation: `ν_j(1) = 1`, then `ν_j(h_j) = 1`,
/// then `λ_j = ν_{j+1}(L_z h_j)`.
pub fn solve_family(tr: &Transfer, j0: i64, len: usize, z: &[Complex64], opts: &RpfOptions) -> Result<RpfFamily> {
    if opts.depth == 0 {
        return Err(Error::Parameter("depth must be at least 1".into()));
    }
    tr.check_z(z)?;
    let period = tr.system().period();
    let count = period.unwrap_or(len.max(1));
    let depth = match period {
        Some(p) => opts.depth.div_ceil(p) * p,
        None => opts.depth,
    };
    let grid = tr.grid();

    // h on fibers j0 ..= j0 + count
    let (h0, h_disc) = forward_iterate(tr, z, j0 - depth as i64, j0, period, opts.early_exit)?;
    let mut hs = Vec::with_capacity(count + 1);
    hs.push(h0);
    for k in 0..count {
        let (op, w) = tr.weighted(j0 + k as i64, z)?;
        let mut next = op.apply_weighted(&w, &hs[k]);
        normalise(&mut next);
        hs.push(next);
    }

    // ν on fibers j0 + count down to j0
    let top = j0 + count as i64;
    let (nu_top, nu_disc) = adjoint_iterate(tr, z, top + depth as i64, top, period, opts.early_exit)?;
    let mut nus = vec![Vec::new(); count + 1];
    nus[count] = nu_top;
    for k in (0..count).rev() {
        let (op, w) = tr.weighted(j0 + k as i64, z)?;
        let mut prev = op.adjoint_weighted(&w, &nus[k + 1]);
        normalise(&mut prev);
        nus[k] = prev;
    }

    // ν(1) = 1, then ν(h) = 1
    for k in 0..=count {
        let s: Complex64 = nus[k].iter().sum();
        nus[k].iter_mut().for_each(|v| *v /= s);
        let nh: Complex64 = hs[k].iter().zip(&nus[k]).map(|(h, n)| h * n).sum();
        hs[k].iter_mut().for_each(|v| *v /= nh);
    }

    let real = z.iter().all(|z| z.im == 0.0);
    let mut lambdas = Vec::with_capacity(count);
    let mut images = Vec::with_capacity(count);
    for k in 0..count {
        let (op, w) = tr.weighted(j0 + k as i64, z)?;
        let img = op.apply_weighted(&w, &hs[k]);
        let lam: Complex64 = img.iter().zip(&nus[k + 1]).map(|(g, n)| g * n).sum();
        lambdas.push(lam);
        images.push((img, op.adjoint_weighted(&w, &nus[k + 1])));
    }

    let convergence = h_disc.max(nu_disc);
    let mut triplets = Vec::with_capacity(count);
    for k in 0..count {
        // For periodic systems compare against the stored (wrapped) neighbour.
        let next = if period.is_some() && k + 1 == count { 0 } else { k + 1 };
        let (img, back) = &images[k];
        let lam = lambdas[k];
        let hn = &hs[next];
        let hn_sup = hn.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let eigen = img.iter().zip(hn).fold(0.0f64, |m, (a, b)| m.max((a - lam * b).norm())) / hn_sup;
        let nu_next_img = if next == k + 1 {
            back.clone()
        } else {
            let (op, w) = tr.weighted(j0 + k as i64, z)?;
            op.adjoint_weighted(&w, &nus[next])
        };
        let adjoint = nu_next_img.iter().zip(&nus[k]).map(|(a, b)| (a - lam * b).norm()).sum::<f64>();
        let nu_one = (nus[k].iter().sum::<Complex64>() - 1.0).norm();
        let nu_h = (hs[k].iter().zip(&nus[k]).map(|(h, n)| h * n).sum::<Complex64>() - 1.0).norm();
        let h = GridFunction { fiber: j0 + k as i64, grid, values: hs[k].clone() };
        if real {
            let min = h.min_re();
            if !(min > 0.0) || lam.re <= 0.0 {
                return Err(Error::PositivityLost { fiber: h.fiber, min });
            }
        }
        triplets.push(Triplet {
            fiber: j0 + k as i64,
            z: z.to_vec(),
            lambda: lam,
            h,
            nu: nus[k].clone(),
            residuals: Residuals { eigen, adjoint, nu_h, nu_one, convergence },
        });
    }
    if !(convergence <= opts.tol) {
        return Err(Error::NotConverged { residual: convergence, depth: opts.depth });
    }
    Ok(RpfFamily { z: z.to_vec(), start: j0, period, grid, triplets })
}

/// The triplet of a single fiber.
pub fn solve_rpf(tr: &Transfer, j: i64, z: &[Complex64], opts: &RpfOptions) -> Result<Triplet> {
    let fam = solve_family(tr, j, 1, z, opts)?;
    fam.get(j).cloned()
}
