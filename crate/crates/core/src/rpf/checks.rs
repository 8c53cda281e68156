use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gibbs::GibbsFamily;
use super::solve::{solve_family, RpfFamily, RpfOptions};
use crate::error::{Error, Result};
use crate::fit::{exp_fit, ExpFit};
use crate::transfer_op::{GridFunction, Transfer};

/// Values below this fraction of the initial residual are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalRow {
    pub a: f64,
    pub b: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    pub fiber: i64,
    pub rows: Vec<ConformalRow>,
    pub max_relative: f64,
}

/// Compare `ν_{j+1}(T_j A)` with `e^{Π_j(0)} ∫_A e^{−φ_j} dν_j` for intervals
/// `A = [a, b]` inside one branch domain. Indicators are taken as the
/// fraction of each node's dual cell covered by the set.
pub fn check_conformal(
    tr: &Transfer,
    gibbs: &GibbsFamily,
    j: i64,
    test_sets: &[(f64, f64)],
) -> Result<ConformalReport> {
    let grid = tr.grid();
    let fiber = tr.system().fiber(j);
    let map = &fiber.map;
    let nu_j = &gibbs.rpf.get(j)?.nu;
    let nu_next = &gibbs.rpf.get(j + 1)?.nu;
    let lambda = gibbs.pressure(j)?.exp();
    let mut rows = Vec::with_capacity(test_sets.len());
    for &(a, b) in test_sets {
        if !(a < b) {
            return Err(Error::Parameter(format!("test set [{a}, {b}] is empty")));
        }
        let i = map.branch_of(0.5 * (a + b));
        let br = &map.branches()[i];
        if a < br.lo - 1e-15 || b > br.hi + 1e-15 {
            return Err(Error::Parameter(format!(
                "test set [{a}, {b}] straddles a branch boundary (branch {i} is [{}, {}])",
                br.lo, br.hi
            )));
        }
        let (ta, tb) = (map.forward_branch(i, a), map.forward_branch(i, b));
        let (ta, tb) = (ta.min(tb), ta.max(tb));
        let lhs: f64 = (0..grid.len()).map(|k| nu_next[k].re * grid.cell_fraction(k, ta, tb)).sum();
        let rhs: f64 = lambda
            * (0..grid.len())
                .map(|k| {
                    let x = grid.node(k);
                    nu_j[k].re * (-fiber.potential.eval(map, x)).exp() * grid.cell_fraction(k, a, b)
                })
                .sum::<f64>();
        let relative = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        rows.push(ConformalRow { a, b, lhs, rhs, relative });
    }
    let max_relative = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
    Ok(ConformalReport { fiber: j, rows, max_relative })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `r_n` for `n = 0 ..= n_max`.
    pub residuals: Vec<f64>,
    /// Fit over `n ≥ 1`; `None` when fewer than two values clear the noise floor.
    pub fit: Option<ExpFit>,
}

fn decay_fit(residuals: Vec<f64>) -> DecayReport {
    let scale = residuals.iter().cloned().fold(0.0, f64::max);
    let ns: Vec<f64> = (1..residuals.len()).map(|n| n as f64).collect();
    let fit = exp_fit(&ns, &residuals[1..], NOISE_FLOOR * scale.max(1e-300));
    DecayReport { residuals, fit }
}

/// `r_n = ‖L_z^{j,n} g / λ_{j,n}(z) − ν_j(g) h_{j+n}‖` for `n = 0 ..= n_max`,
/// with `‖·‖ = sup + v`, and its log-linear fit.
pub fn check_exp_convergence(
    tr: &Transfer,
    family: &RpfFamily,
    j: i64,
    g: &GridFunction,
    n_max: usize,
) -> Result<DecayReport> {
    let alpha = tr.alpha();
    let t0 = family.get(j)?;
    let c = t0.nu_of(g);
    let mut cur = g.clone();
    let mut residuals = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let f = j + n as i64;
        let t = family.get(f)?;
        let target = t.h.scale(c).with_fiber(f);
        residuals.push(cur.sub(&target).norm(alpha));
        if n < n_max {
            let next = tr.apply(f, &family.z, &cur)?;
            cur = next.scale(1.0 / t.lambda);
        }
    }
    Ok(decay_fit(residuals))
}

/// Correlation gaps `|μ_j(g · f∘T_j^n) − μ_j(g) μ_{j+n}(f)|`, computed by
/// moving `g` forward with the normalised operator:
/// `μ_j(g · f∘T^n) = μ_{j+n}(f · L̃^n g)`.
pub fn check_decay_correlations(
    tr: &Transfer,
    gibbs: &GibbsFamily,
    j: i64,
    g: &GridFunction,
    f: impl Fn(f64) -> f64,
    n_max: usize,
) -> Result<DecayReport> {
    let grid = tr.grid();
    let zero = vec![Complex64::new(0.0, 0.0); tr.dim()];
    let mg = gibbs.expect(j, g)?;
    let fvals: Vec<f64> = grid.nodes().map(&f).collect();
    let mut cur = g.clone();
    let mut residuals = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let k = j + n as i64;
        let mu = gibbs.mu(k)?;
        let corr: Complex64 = (0..grid.len()).map(|i| mu[i] * fvals[i] * cur.values[i]).sum();
        let mf: f64 = (0..grid.len()).map(|i| mu[i] * fvals[i]).sum();
        residuals.push((corr - mg * mf).norm());
        if n < n_max {
            let h = gibbs.h(k)?;
            let hn = gibbs.h(k + 1)?;
            let lam = gibbs.lambda(k)?;
            let img = tr.apply(k, &zero, &cur.mul(&h.clone().with_fiber(k)))?;
            cur = img.zip(&hn.clone().with_fiber(k + 1), |a, b| a / (lam * b));
        }
    }
    Ok(decay_fit(residuals))
}

/// Bounds and analyticity diagnostics of `z ↦ (λ_j(z), h_j, ν_j)` on a small disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilReport {
    pub radius: f64,
    pub max_lambda: f64,
    pub max_h_norm: f64,
    pub max_nu_norm: f64,
    /// Discrete Cauchy–Riemann residual of `λ_j` at 0 along the first coordinate.
    pub cauchy_riemann: f64,
}

fn along(dim: usize, w: Complex64) -> Vec<Complex64> {
    let mut z = vec![Complex64::new(0.0, 0.0); dim];
    z[0] = w;
    z
}

/// Solve on the 9-point stencil `{0} ∪ {r e^{iπk/4}}` in the first
/// coordinate, and evaluate the Cauchy–Riemann defect
/// `|∂_y λ − i ∂_x λ|` from central differences at steps `cr_step` and
/// `cr_step / 2`, Richardson-combined so the `O(step²)` error cancels.
pub fn stencil_check(tr: &Transfer, j: i64, r: f64, cr_step: f64, opts: &RpfOptions) -> Result<StencilReport> {
    let d = tr.dim();
    let alpha = tr.alpha();
    let mut max_lambda = 0.0f64;
    let mut max_h = 0.0f64;
    let mut max_nu = 0.0f64;
    let mut points = vec![Complex64::new(0.0, 0.0)];
    points.extend((0..8).map(|k| Complex64::from_polar(r, std::f64::consts::PI * k as f64 / 4.0)));
    for w in points {
        let fam = solve_family(tr, j, 1, &along(d, w), opts)?;
        let t = fam.get(j)?;
        max_lambda = max_lambda.max(t.lambda.norm());
        max_h = max_h.max(t.h.norm(alpha));
        max_nu = max_nu.max(t.nu.iter().map(|v| v.norm()).sum());
    }
    let lam = |w: Complex64| -> Result<Complex64> { Ok(solve_family(tr, j, 1, &along(d, w), opts)?.get(j)?.lambda) };
    let defect = |s: f64| -> Result<Complex64> {
        let dx = (lam(Complex64::new(s, 0.0))? - lam(Complex64::new(-s, 0.0))?) / (2.0 * s);
        let dy = (lam(Complex64::new(0.0, s))? - lam(Complex64::new(0.0, -s))?) / (2.0 * s);
        Ok(dy - Complex64::i() * dx)
    };
    let (a, b) = (defect(cr_step)?, defect(cr_step / 2.0)?);
    let cauchy_riemann = ((4.0 * b - a) / 3.0).norm();
    Ok(StencilReport { radius: r, max_lambda, max_h_norm: max_h, max_nu_norm: max_nu, cauchy_riemann })
}
