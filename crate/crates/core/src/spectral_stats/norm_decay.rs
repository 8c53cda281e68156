use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{line_fit, LineFit};
use crate::rpf::GibbsFamily;
use crate::transfer_op::{GridFunction, Normalized, Step, Transfer, TrialSet, DEFAULT_TRIALS};

/// Normalised steps for fibers `j .. j + n`; periodic systems build one
/// period and reuse it.
pub(crate) struct StepChain {
    steps: Vec<Step>,
    period: Option<usize>,
}

impl StepChain {
    pub(crate) fn new(norm: &Normalized, j: i64, n: usize, t: &[f64]) -> Result<Self> {
        let period = norm.transfer().system().period();
        let count = period.map_or(n, |p| p.min(n));
        let steps = (0..count as i64).map(|k| norm.step(j + k, t)).collect::<Result<_>>()?;
        Ok(StepChain { steps, period })
    }

    pub(crate) fn get(&self, k: usize) -> &Step {
        match self.period {
            Some(p) => &self.steps[k % p],
            None => &self.steps[k],
        }
    }
}

/// `μ_{j+n}(L̃_{it}^{j,n} 1)` with the centred observable, i.e. the
/// characteristic function `E_{μ_j} e^{i t·(S_{j,n} − μ_j(S_{j,n}))}`.
pub fn characteristic(tr: &Transfer, gibbs: &GibbsFamily, j: i64, n: usize, t: &[f64]) -> Result<Complex64> {
    let norm = Normalized::new(tr, gibbs)?.centred();
    let chain = StepChain::new(&norm, j, n, t)?;
    let mut g = vec![Complex64::new(1.0, 0.0); tr.grid().len()];
    for k in 0..n {
        g = chain.get(k).apply(&g);
    }
    Ok(g.iter().zip(gibbs.mu(j + n as i64)?).map(|(v, m)| v * m).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDecayConfig {
    pub ts: Vec<f64>,
    /// Unit direction `v`; the scan uses `t v`. Defaults to `e₁`.
    pub direction: Option<Vec<f64>>,
    pub n_max: usize,
    /// Steps excluded from the fit while the transient dies out.
    pub burn_in: usize,
    pub trials: usize,
    pub seed: u64,
    /// Norms above this flag a failure of the uniform bound.
    pub divergence_cap: f64,
}

impl Default for NormDecayConfig {
    fn default() -> Self {
        NormDecayConfig {
            ts: vec![0.05, 0.1, 0.2],
            direction: None,
            n_max: 200,
            burn_in: 40,
            trials: DEFAULT_TRIALS,
            seed: 0,
            divergence_cap: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDecayRow {
    pub t: f64,
    /// `‖L̃_{it}^{j,n}‖` estimates for `n = 0 ..= n_max`.
    pub norms: Vec<f64>,
    /// `log ‖·‖ ≈ log C + slope · n` past the burn-in.
    pub fit: Option<LineFit>,
    /// `c = −slope / t²`.
    pub c: f64,
    pub diverged: bool,
}

impl NormDecayRow {
    pub fn slope(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.slope)
    }

    pub fn big_c(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.intercept.exp())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDecayReport {
    pub start: i64,
    pub rows: Vec<NormDecayRow>,
    /// Largest norm over every `(t, n)` of the scan.
    pub sup_norm: f64,
    /// `max c / min c` over the non-zero `t`.
    pub c_spread: f64,
}

impl NormDecayReport {
    pub fn row(&self, t: f64) -> Option<&NormDecayRow> {
        self.rows.iter().find(|r| r.t == t)
    }

    pub fn uniform_bound_holds(&self, cap: f64) -> bool {
        self.rows.iter().all(|r| !r.diverged) && self.sup_norm <= cap
    }
}

/// Scan `n ↦ ‖L̃_{it}^{j,n}‖` for each `t` and fit the Gaussian decay.
///
/// Norms are the largest ratio `‖L̃^n g‖ / ‖g‖` over a fixed trial set,
/// each trial being iterated once along `n`.
pub fn norm_decay_scan(tr: &Transfer, gibbs: &GibbsFamily, j: i64, cfg: &NormDecayConfig) -> Result<NormDecayReport> {
    let d = tr.dim();
    let direction = match &cfg.direction {
        Some(v) if v.len() == d => v.clone(),
        Some(v) => return Err(Error::Parameter(format!("direction has {} components, observable has {d}", v.len()))),
        None => {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        }
    };
    if cfg.burn_in + 2 > cfg.n_max {
        return Err(Error::Parameter("n_max must exceed the burn-in by at least 2".into()));
    }
    let norm = Normalized::new(tr, gibbs)?.centred();
    let trials = TrialSet::new(tr.grid(), j, tr.alpha(), cfg.trials, cfg.seed);
    let alpha = tr.alpha();
    let mut rows = Vec::with_capacity(cfg.ts.len());
    for &t in &cfg.ts {
        let tv: Vec<f64> = direction.iter().map(|v| v * t).collect();
        let chain = StepChain::new(&norm, j, cfg.n_max, &tv)?;
        let per_trial: Vec<Vec<f64>> = trials
            .functions
            .par_iter()
            .zip(&trials.norms)
            .map(|(g, &g_norm)| {
                let mut cur = g.values.clone();
                let mut out = Vec::with_capacity(cfg.n_max + 1);
                out.push(1.0);
                for k in 0..cfg.n_max {
                    cur = chain.get(k).apply_seq(&cur);
                    let f = GridFunction { fiber: j + k as i64 + 1, grid: g.grid, values: std::mem::take(&mut cur) };
                    out.push(f.norm(alpha) / g_norm);
                    cur = f.values;
                }
                out
            })
            .collect();
        let norms: Vec<f64> = (0..=cfg.n_max).map(|n| per_trial.iter().map(|r| r[n]).fold(0.0, f64::max)).collect();
        let diverged = norms.iter().any(|v| !v.is_finite() || *v > cfg.divergence_cap);
        let (x, y): (Vec<f64>, Vec<f64>) =
            (cfg.burn_in..=cfg.n_max).filter(|&n| norms[n] > 0.0).map(|n| (n as f64, norms[n].ln())).unzip();
        let fit = line_fit(&x, &y);
        let c = match fit {
            Some(f) if t != 0.0 => -f.slope / (t * t),
            _ => f64::NAN,
        };
        rows.push(NormDecayRow { t, norms, fit, c, diverged });
    }
    let sup_norm = rows.iter().flat_map(|r| r.norms.iter().copied()).fold(0.0, f64::max);
    let cs: Vec<f64> = rows.iter().filter(|r| r.t != 0.0 && r.c.is_finite()).map(|r| r.c).collect();
    let c_spread = if cs.is_empty() {
        f64::NAN
    } else {
        cs.iter().copied().fold(f64::MIN, f64::max) / cs.iter().copied().fold(f64::MAX, f64::min)
    };
    Ok(NormDecayReport { start: j, rows, sup_norm, c_spread })
}
