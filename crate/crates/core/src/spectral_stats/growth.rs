use serde::{Deserialize, Serialize};

use super::covariance::{covariance_curve, CovarianceCurve};
use crate::error::{Error, Result};
use crate::rpf::GibbsFamily;
use crate::transfer_op::{op_norm_estimate, GridFunction, Transfer, TrialSet, DEFAULT_TRIALS};
use num_complex::Complex64;

/// `Cov·v·v / (n |v|²)` at one `(j, n, v)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCell {
    pub j: i64,
    pub n: usize,
    pub direction: Vec<f64>,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub cells: Vec<GrowthCell>,
    /// `λ_min(Cov_{j,n}) / n` per `(j, n)`.
    pub min_eigen_ratio: Vec<(i64, usize, f64)>,
    pub declared_c: f64,
    /// Minimum over `j` and `v` at the largest `n`.
    pub min_ratio: f64,
    pub witness: Option<GrowthCell>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Check `Cov_{μ_j}(S_{j,n}) v·v ≥ c n |v|²` for every `j`, `v` at the
/// largest `n`; smaller `n` are reported but not asserted.
pub fn variance_growth_check(
    tr: &Transfer,
    gibbs: &GibbsFamily,
    js: &[i64],
    ns: &[usize],
    directions: &[Vec<f64>],
    declared_c: f64,
) -> Result<GrowthReport> {
    let n_max = *ns.iter().max().ok_or_else(|| Error::Parameter("no block lengths given".into()))?;
    if ns.contains(&0) {
        return Err(Error::Parameter("block lengths must be positive".into()));
    }
    let d = tr.dim();
    if let Some(v) = directions.iter().find(|v| v.len() != d || v.iter().all(|x| *x == 0.0)) {
        return Err(Error::Parameter(format!("direction {v:?} is not a non-zero vector of length {d}")));
    }
    let mut cells = Vec::new();
    let mut eig = Vec::new();
    for &j in js {
        let curve: CovarianceCurve = covariance_curve(tr, gibbs, j, n_max)?;
        for &n in ns {
            for v in directions {
                let v2: f64 = v.iter().map(|x| x * x).sum();
                cells.push(GrowthCell { j, n, direction: v.clone(), ratio: curve.quadratic(n, v) / (n as f64 * v2) });
            }
            eig.push((j, n, curve.min_eigenvalue(n) / n as f64));
        }
    }
    let last: Vec<&GrowthCell> = cells.iter().filter(|c| c.n == n_max).collect();
    let worst = last.iter().min_by(|a, b| a.ratio.total_cmp(&b.ratio)).copied();
    let min_ratio = worst.map_or(f64::NAN, |c| c.ratio);
    let witness = worst.filter(|c| !(c.ratio >= declared_c)).cloned();
    Ok(GrowthReport { cells, min_eigen_ratio: eig, declared_c, min_ratio, witness })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `max_j max_z ‖L_z^{(j)} − L'_z^{(j)}‖` over the stencil.
    pub epsilon_hat: f64,
    /// `sup_n ‖Cov_n − Cov'_n‖ / n`, entrywise max norm.
    pub sup_ratio: f64,
    pub per_n: Vec<f64>,
}

/// Stencil `{0, ±r₀, ±i r₀}` along each coordinate.
fn stencil(d: usize, r0: f64) -> Vec<Vec<Complex64>> {
    let mut out = vec![vec![Complex64::new(0.0, 0.0); d]];
    for a in 0..d {
        for w in [Complex64::new(r0, 0.0), Complex64::new(-r0, 0.0), Complex64::new(0.0, r0), Complex64::new(0.0, -r0)]
        {
            let mut z = vec![Complex64::new(0.0, 0.0); d];
            z[a] = w;
            out.push(z);
        }
    }
    out
}

/// Distance between two systems on `j .. j + n_max` and the resulting
/// covariance drift. `gibbs` and `gibbs_pert` are the `z = 0` families.
#[allow(clippy::too_many_arguments)]
pub fn stability_scan(
    base: &Transfer,
    gibbs: &GibbsFamily,
    pert: &Transfer,
    gibbs_pert: &GibbsFamily,
    j: i64,
    n_max: usize,
    r0: f64,
    seed: u64,
) -> Result<StabilityReport> {
    if base.grid() != pert.grid() || base.dim() != pert.dim() {
        return Err(Error::Parameter("systems must share the grid and observable dimension".into()));
    }
    let trials = TrialSet::new(base.grid(), j, base.alpha(), DEFAULT_TRIALS, seed);
    let fibers: Vec<i64> = match (base.system().period(), pert.system().period()) {
        (Some(p), Some(q)) => (0..lcm(p, q).min(n_max) as i64).map(|k| j + k).collect(),
        _ => (0..n_max as i64).map(|k| j + k).collect(),
    };
    let mut epsilon_hat = 0.0f64;
    for z in stencil(base.dim(), r0) {
        for &fib in &fibers {
            let (oa, wa) = base.weighted(fib, &z)?;
            let (ob, wb) = pert.weighted(fib, &z)?;
            let e = op_norm_estimate(
                |g| {
                    let a = oa.apply_weighted_seq(&wa, &g.values);
                    let b = ob.apply_weighted_seq(&wb, &g.values);
                    GridFunction {
                        fiber: fib + 1,
                        grid: g.grid,
                        values: a.iter().zip(&b).map(|(x, y)| x - y).collect(),
                    }
                },
                &trials,
            );
            epsilon_hat = epsilon_hat.max(e);
        }
    }
    let a = covariance_curve(base, gibbs, j, n_max)?;
    let b = covariance_curve(pert, gibbs_pert, j, n_max)?;
    let per_n: Vec<f64> = (1..=n_max)
        .map(|n| a.at(n).iter().zip(b.at(n)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / n as f64)
        .collect();
    let sup_ratio = per_n.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport { epsilon_hat, sup_ratio, per_n })
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}
