use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{quadrature_means, replica_rng, CellSampler, FiberCache};
use crate::error::{Error, Result};
use crate::rpf::{solve_family, GibbsFamily, RpfOptions};
use crate::spectral_stats::covariance_curve;
use crate::transfer_op::Transfer;

const TILT_DOMAIN: u64 = 3;
const GAUSS_DOMAIN: u64 = 4;

/// Moderate-deviation run: `b_n = n^γ`, thresholds `x σ̂ b_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    pub gamma: f64,
    pub xs: Vec<f64>,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// Sample under the exponentially tilted measure and reweight. Without
    /// it, plain sampling only resolves probabilities above `~10/N`.
    #[serde(default = "yes")]
    pub tilt: bool,
}

fn yes() -> bool {
    true
}

impl MdpConfig {
    pub fn new(gamma: f64, xs: Vec<f64>, n: usize, replicas: usize, seed: u64) -> Result<Self> {
        let cfg = MdpConfig { gamma, xs, n, replicas, seed, direction: None, tilt: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.5 && self.gamma < 1.0) {
            return Err(Error::Parameter(format!("γ = {} must lie in (1/2, 1)", self.gamma)));
        }
        if self.n < 2 || self.replicas == 0 {
            return Err(Error::Parameter("need n ≥ 2 and at least one replica".into()));
        }
        if self.xs.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::Parameter("deviation levels x must be positive".into()));
        }
        Ok(())
    }

    pub fn b_n(&self) -> f64 {
        (self.n as f64).powf(self.gamma)
    }

    /// `n / b_n²`.
    pub fn rate_scale(&self) -> f64 {
        self.n as f64 / self.b_n().powi(2)
    }

    /// Tilt that moves the mean of `S_n` onto the threshold.
    pub fn tilt_for(&self, x: f64, sigma: f64) -> f64 {
        x * self.b_n() / (sigma * self.n as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpStatus {
    Ok,
    /// No replica crossed the threshold: the probability is unresolved.
    InsufficientTailMass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpRow {
    pub x: f64,
    pub threshold: f64,
    pub theta: f64,
    pub hits: usize,
    pub probability: f64,
    pub std_error: f64,
    /// `(n / b_n²) log P(W_n > x σ̂)`.
    pub rate: f64,
    /// `−x²/2`.
    pub target: f64,
    pub rel_error: f64,
    pub status: MdpStatus,
}

impl MdpRow {
    pub fn within(&self, rel: f64) -> bool {
        self.status == MdpStatus::Ok && self.rel_error <= rel
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpTable {
    pub n: usize,
    pub gamma: f64,
    pub b_n: f64,
    pub sigma2: f64,
    pub centre: f64,
    pub rows: Vec<MdpRow>,
}

impl MdpTable {
    /// Every resolved row within `rel` of its target, and at least one resolved.
    pub fn passed(&self, rel: f64) -> bool {
        self.rows.iter().any(|r| r.status == MdpStatus::Ok)
            && self.rows.iter().all(|r| r.status == MdpStatus::InsufficientTailMass || r.within(rel))
    }
}

/// Weighted tail estimate from `(centred sum, log-weight)` pairs.
fn tail_row(cfg: &MdpConfig, x: f64, sigma: f64, theta: f64, draws: &[(f64, f64)]) -> MdpRow {
    let threshold = x * sigma * cfg.b_n();
    let n = draws.len() as f64;
    let vals: Vec<f64> = draws.iter().map(|&(s, lw)| if s > threshold { lw.exp() } else { 0.0 }).collect();
    let hits = vals.iter().filter(|v| **v > 0.0).count();
    let p = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - p).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let target = -0.5 * x * x;
    let (rate, status) = if hits == 0 || !(p > 0.0) {
        (f64::NAN, MdpStatus::InsufficientTailMass)
    } else {
        (cfg.rate_scale() * p.ln(), MdpStatus::Ok)
    };
    MdpRow {
        x,
        threshold,
        theta,
        hits,
        probability: p,
        std_error: (var / n).sqrt(),
        rate,
        target,
        rel_error: ((rate - target) / target).abs(),
        status,
    }
}

/// Interpolated real part of nodal values.
#[inline]
fn interp(grid: &crate::transfer_op::Grid, v: &[f64], x: f64) -> f64 {
    let (l, r, t) = grid.locate(x);
    v[l] * (1.0 - t) + v[r] * t
}

/// Centred scalar sums `S_n·v − μ(S_n·v)` and log importance weights.
///
/// Paths are drawn backwards from fiber `n`: the endpoint from the grid
/// law `∝ ν⁰_n h^θ_n`, then each predecessor among the preimages with
/// probability `∝ e^{φ(y) + θ u(y)·v} h^θ_k(y)`. At `θ = 0` this is the
/// time reversal of `μ⁰`; the weight is the exact likelihood ratio of the
/// `θ = 0` chain against the tilted one, so the estimator is unbiased for
/// the `θ = 0` chain whatever `θ` is.
fn tilted_draws(
    tr: &Transfer,
    gibbs: &GibbsFamily,
    cfg: &MdpConfig,
    v: &[f64],
    theta: f64,
    centre: f64,
    opts: &RpfOptions,
) -> Result<Vec<(f64, f64)>> {
    let n = cfg.n;
    let grid = tr.grid();
    let d = tr.dim();
    let real = |fam_h: &crate::transfer_op::GridFunction| -> Vec<f64> { fam_h.values.iter().map(|c| c.re).collect() };
    let period = tr.system().period();
    let count = period.map_or(n + 1, |p| p.min(n + 1));
    let (h_theta, h_zero): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if theta == 0.0 {
        let h: Vec<Vec<f64>> = (0..count as i64).map(|k| gibbs.h(k).map(real)).collect::<Result<_>>()?;
        (h.clone(), h)
    } else {
        let z: Vec<Complex64> = v.iter().map(|a| Complex64::new(a * theta, 0.0)).collect();
        let fam = solve_family(tr, 0, n + 1, &z, opts)?;
        (
            (0..count as i64).map(|k| fam.get(k).map(|t| real(&t.h))).collect::<Result<_>>()?,
            (0..count as i64).map(|k| gibbs.h(k).map(real)).collect::<Result<_>>()?,
        )
    };
    if h_theta.iter().flatten().any(|h| !(*h > 0.0)) {
        return Err(Error::PositivityLost {
            fiber: 0,
            min: h_theta.iter().flatten().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let idx = |k: usize| period.map_or(k, |p| k % p);

    let mu_n = gibbs.mu(n as i64)?;
    let nu_n = &gibbs.rpf.get(n as i64)?.nu;
    let q: Vec<f64> = nu_n.iter().zip(&h_theta[idx(n)]).map(|(a, h)| a.re.max(0.0) * h).collect();
    let q_total: f64 = q.iter().sum();
    let cells = CellSampler::new(&q)?;
    let fibers = FiberCache::new(tr, 0, n);

    (0..cfg.replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(cfg.seed, TILT_DOMAIN, i);
            let c = cells.draw(&mut rng);
            let (a, b) = grid.cell(c);
            let mut x = grid.space.wrap(a + (b - a) * rng.random::<f64>());
            let mut logw = (mu_n[c] / (q[c] / q_total)).ln();
            let mut s = 0.0;
            let mut u = vec![0.0; d];
            let mut w_t = [0.0f64; 8];
            let mut w_0 = [0.0f64; 8];
            let mut us = [0.0f64; 8];
            for k in (0..n).rev() {
                let f = fibers.get(k);
                let pre = f.map.preimages(x)?;
                let (ht, h0) = (&h_theta[idx(k)], &h_zero[idx(k)]);
                let (mut tot_t, mut tot_0) = (0.0, 0.0);
                for (a, &y) in pre.iter().enumerate() {
                    f.observable.eval_into(&f.map, y, &mut u);
                    let uv: f64 = u.iter().zip(v).map(|(p, q)| p * q).sum();
                    let e = f.potential.eval(&f.map, y);
                    w_t[a] = (e + theta * uv).exp() * interp(&grid, ht, y);
                    w_0[a] = e.exp() * interp(&grid, h0, y);
                    us[a] = uv;
                    tot_t += w_t[a];
                    tot_0 += w_0[a];
                }
                let mut r = rng.random::<f64>() * tot_t;
                let mut pick = pre.len() - 1;
                for a in 0..pre.len() {
                    if r < w_t[a] {
                        pick = a;
                        break;
                    }
                    r -= w_t[a];
                }
                logw += (w_0[pick] / tot_0).ln() - (w_t[pick] / tot_t).ln();
                s += us[pick];
                x = pre[pick];
            }
            Ok((s - centre, logw))
        })
        .collect()
}

/// `(n/b_n²) log P(W_n > x σ̂)` per `x`, with `W_n = (S_n·v − μ(S_n·v)) / b_n`
/// and `σ̂² = Var(S_n·v)/n` from the exact covariance recursion.
pub fn mdp_check(tr: &Transfer, gibbs: &GibbsFamily, cfg: &MdpConfig, opts: &RpfOptions) -> Result<MdpTable> {
    cfg.validate()?;
    let d = tr.dim();
    let v = match &cfg.direction {
        Some(v) if v.len() == d => v.clone(),
        Some(v) => return Err(Error::Parameter(format!("direction has {} components, observable has {d}", v.len()))),
        None => {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        }
    };
    if tr.system().fiber(0).map.degree() > 8 {
        return Err(Error::Parameter("at most 8 branches are supported".into()));
    }
    let sigma2 = covariance_curve(tr, gibbs, 0, cfg.n)?.quadratic(cfg.n, &v) / cfg.n as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::Precondition(format!(
            "σ̂² = {sigma2:.3e}: no moderate deviations for a degenerate observable"
        )));
    }
    let sigma = sigma2.sqrt();
    let means = quadrature_means(tr, gibbs, 0, &[cfg.n])?;
    let centre: f64 = means[0].iter().zip(&v).map(|(a, b)| a * b).sum();
    let rows = cfg
        .xs
        .iter()
        .map(|&x| {
            let theta = if cfg.tilt { cfg.tilt_for(x, sigma) } else { 0.0 };
            let draws = tilted_draws(tr, gibbs, cfg, &v, theta, centre, opts)?;
            Ok(tail_row(cfg, x, sigma, theta, &draws))
        })
        .collect::<Result<_>>()?;
    Ok(MdpTable { n: cfg.n, gamma: cfg.gamma, b_n: cfg.b_n(), sigma2, centre, rows })
}

/// The same estimator on sums of `n` i.i.d. standard normals: under tilt
/// `θ` the sum is `N(θn, n)` and the weight `e^{−θS + nθ²/2}`.
pub fn mdp_gaussian_control(cfg: &MdpConfig) -> Result<MdpTable> {
    cfg.validate()?;
    let n = cfg.n as f64;
    let rows = cfg
        .xs
        .iter()
        .map(|&x| {
            let theta = if cfg.tilt { cfg.tilt_for(x, 1.0) } else { 0.0 };
            let draws: Vec<(f64, f64)> = (0..cfg.replicas)
                .into_par_iter()
                .map(|i| {
                    let mut rng = replica_rng(cfg.seed, GAUSS_DOMAIN, i);
                    let z: f64 = rng.sample(StandardNormal);
                    let s = theta * n + n.sqrt() * z;
                    (s, -theta * s + 0.5 * n * theta * theta)
                })
                .collect();
            tail_row(cfg, x, 1.0, theta, &draws)
        })
        .collect();
    Ok(MdpTable { n: cfg.n, gamma: cfg.gamma, b_n: cfg.b_n(), sigma2: 1.0, centre: 0.0, rows })
}
