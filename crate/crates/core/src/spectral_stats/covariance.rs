use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pressure::{pressure_blocks, PressureOptions, PressureSampler};
use crate::error::{Error, Result};
use crate::rpf::GibbsFamily;
use crate::transfer_op::{Normalized, Transfer};

/// How a covariance curve was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMode {
    /// Exact on the grid, through the normalised operator.
    Quadrature,
    /// Empirical, from simulated Birkhoff sums.
    MonteCarlo { replicas: usize, seed: u64 },
}

/// `Cov_{μ_j}(S_{j,n} u)` for `n = 1 ..= n_max`, row-major `d × d` each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCurve {
    pub start: i64,
    pub dim: usize,
    pub mode: CovMode,
    pub cov: Vec<Vec<f64>>,
}

impl CovarianceCurve {
    pub fn n_max(&self) -> usize {
        self.cov.len()
    }

    /// Covariance after `n ≥ 1` steps.
    pub fn at(&self, n: usize) -> &[f64] {
        &self.cov[n - 1]
    }

    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, self.at(n))
    }

    /// `v^T Cov_n v`.
    pub fn quadratic(&self, n: usize, v: &[f64]) -> f64 {
        let c = self.at(n);
        let d = self.dim;
        (0..d).map(|a| (0..d).map(|b| v[a] * c[a * d + b] * v[b]).sum::<f64>()).sum()
    }

    /// Smallest eigenvalue of `Cov_n`.
    pub fn min_eigenvalue(&self, n: usize) -> f64 {
        self.matrix(n).symmetric_eigen().eigenvalues.min()
    }
}

/// Centred observable values `u_j(x_k) − μ_j(u_j)`, laid out node-major.
fn centred_observable(tr: &Transfer, gibbs: &GibbsFamily, j: i64) -> Result<Vec<f64>> {
    let fiber = tr.system().fiber(j);
    let grid = tr.grid();
    let d = fiber.observable.dim();
    let mu = gibbs.mu(j)?;
    let mut vals = vec![0.0; grid.len() * d];
    for k in 0..grid.len() {
        fiber.observable.eval_into(&fiber.map, grid.node(k), &mut vals[k * d..(k + 1) * d]);
    }
    let mut mean = vec![0.0; d];
    for (k, m) in mu.iter().enumerate() {
        mean.iter_mut().zip(&vals[k * d..(k + 1) * d]).for_each(|(a, v)| *a += m * v);
    }
    for k in 0..grid.len() {
        vals[k * d..(k + 1) * d].iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    Ok(vals)
}

/// Exact covariance of the centred Birkhoff sums under `μ_j`.
///
/// With `ū_k` the centred observable on fiber `j + k`, `B_0 = 0` and
/// `A_k = ū_k + B_k`, `B_{k+1} = L̃ A_k`, the increment is
/// `Cov_{n+1} − Cov_n = μ_{j+n}(ū ūᵀ + ū Bᵀ + B ūᵀ)`: every cross term
/// `μ(ū_a ∘ T^{b−a} · ū_b)` is transported to the later fiber by duality.
pub fn covariance_curve(tr: &Transfer, gibbs: &GibbsFamily, j: i64, n_max: usize) -> Result<CovarianceCurve> {
    let d = tr.dim();
    let len = tr.grid().len();
    let norm = Normalized::new(tr, gibbs)?;
    let zero = vec![0.0; d];
    let mut cov = Vec::with_capacity(n_max);
    let mut acc = vec![0.0; d * d];
    // B, one column per component.
    let mut b: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); len]; d];
    for k in 0..n_max as i64 {
        let fib = j + k;
        let u = centred_observable(tr, gibbs, fib)?;
        let mu = gibbs.mu(fib)?;
        for (x, &m) in mu.iter().enumerate() {
            let ux = &u[x * d..(x + 1) * d];
            for a in 0..d {
                for c in 0..d {
                    acc[a * d + c] += m * (ux[a] * ux[c] + ux[a] * b[c][x].re + b[a][x].re * ux[c]);
                }
            }
        }
        cov.push(acc.clone());
        if (k as usize) + 1 < n_max {
            let step = norm.step(fib, &zero)?;
            for (a, col) in b.iter_mut().enumerate() {
                let av: Vec<Complex64> = col.iter().enumerate().map(|(x, v)| v + u[x * d + a]).collect();
                *col = step.apply(&av);
            }
        }
    }
    Ok(CovarianceCurve { start: j, dim: d, mode: CovMode::Quadrature, cov })
}

/// One row of the covariance/Hessian comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovHessianRow {
    pub n: usize,
    pub cov: Vec<f64>,
    pub hessian: Vec<f64>,
    pub hessian_five_point: Vec<f64>,
    /// Largest entrywise `|Cov − Hess|`.
    pub diff: f64,
    /// Relative gap between the two Hessian stencils.
    pub stencil_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovHessianReport {
    pub start: i64,
    pub rows: Vec<CovHessianRow>,
    pub max_diff: f64,
    pub bound: f64,
}

impl CovHessianReport {
    pub fn ok(&self) -> bool {
        self.max_diff <= self.bound
    }
}

/// Compare `Cov_{μ_j}(S_{j,n} u)` with `∇²Π_{j,n}(0)` at each requested `n`.
pub fn check_cov_hessian(
    tr: &Transfer,
    gibbs: &GibbsFamily,
    j: i64,
    ns: &[usize],
    bound: f64,
    opts: &PressureOptions,
) -> Result<CovHessianReport> {
    let n_max = *ns.iter().max().ok_or_else(|| Error::Parameter("no block lengths given".into()))?;
    if ns.contains(&0) {
        return Err(Error::Parameter("block lengths must be positive".into()));
    }
    let curve = covariance_curve(tr, gibbs, j, n_max)?;
    let sampler = PressureSampler::new(tr, gibbs, j, n_max, opts.rpf)?;
    let blocks = pressure_blocks(&sampler, opts)?;
    let rows: Vec<CovHessianRow> = ns
        .iter()
        .map(|&n| {
            let block = &blocks[n - 1];
            let cov = curve.at(n).to_vec();
            let diff = cov.iter().zip(&block.hessian).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            CovHessianRow {
                n,
                cov,
                hessian: block.hessian.clone(),
                hessian_five_point: block.hessian_five_point.clone(),
                diff,
                stencil_gap: block.stencil_gap(),
            }
        })
        .collect();
    let max_diff = rows.iter().map(|r| r.diff).fold(0.0, f64::max);
    Ok(CovHessianReport { start: j, rows, max_diff, bound })
}
