use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::sim::BirkhoffSums;
use crate::error::{Error, Result};
use crate::fit::line_fit;

/// Kolmogorov–Smirnov distance between the empirical law of `xs` and `cdf`.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// `Φ`.
pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

fn mean_var(xs: &[f64], centre: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - centre).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungStats {
    pub n: usize,
    /// Empirical mean of `S_n`, the quadrature centre and the standard error.
    pub mean: f64,
    pub centre: f64,
    pub std_error: f64,
    /// Empirical `Var(S_n)` about the centre.
    pub var: f64,
    pub ks: f64,
    pub ks_scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeVerdict {
    Pass,
    Fail,
    /// `Var(S_n)/n` below the floor: a coboundary-like observable, no KS test.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenReport {
    pub rows: Vec<RungStats>,
    /// `max / min` of `KS·√n` over the rungs.
    pub scaled_ratio: f64,
    pub improving: bool,
    /// Largest `|mean − centre|` in standard errors.
    pub centring_z: f64,
    pub verdict: BeVerdict,
}

/// Default floor on `Var(S_n)/n` below which a run is called degenerate.
pub const VARIANCE_FLOOR: f64 = 1e-2;

/// KS distance of `(S_n − μ(S_n))/σ̂_n` to `Φ` at every rung.
///
/// `centres` are the quadrature means `μ(S_n)` (scalar projection), one per
/// rung. `σ̂_n` is the empirical spread about that centre.
pub fn clt_berry_esseen(sums: &[Vec<f64>], ladder: &[usize], centres: &[f64], floor: f64) -> Result<BerryEsseenReport> {
    if sums.len() != ladder.len() || centres.len() != ladder.len() || ladder.is_empty() {
        return Err(Error::Parameter("sums, ladder and centres must have one entry per rung".into()));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    let mut degenerate = false;
    for ((xs, &n), &c) in sums.iter().zip(ladder).zip(centres) {
        let (mean, var) = mean_var(xs, c);
        let std_error =
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0).max(1.0) / xs.len() as f64)
                .sqrt();
        let ks = if var / n.max(1) as f64 >= floor {
            let sd = var.sqrt();
            let z: Vec<f64> = xs.iter().map(|x| (x - c) / sd).collect();
            ks_distance(&z, std_normal_cdf)
        } else {
            degenerate = true;
            f64::NAN
        };
        rows.push(RungStats { n, mean, centre: c, std_error, var, ks, ks_scaled: ks * (n as f64).sqrt() });
    }
    let centring_z = rows
        .iter()
        .map(|r| if r.std_error > 0.0 { (r.mean - r.centre).abs() / r.std_error } else { 0.0 })
        .fold(0.0, f64::max);
    if degenerate {
        return Ok(BerryEsseenReport {
            rows,
            scaled_ratio: f64::NAN,
            improving: false,
            centring_z,
            verdict: BeVerdict::Degenerate,
        });
    }
    let scaled: Vec<f64> = rows.iter().map(|r| r.ks_scaled).collect();
    let scaled_ratio =
        scaled.iter().copied().fold(0.0, f64::max) / scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let improving = rows.last().unwrap().ks < rows[0].ks;
    let verdict = if scaled_ratio <= 3.0 && improving { BeVerdict::Pass } else { BeVerdict::Fail };
    Ok(BerryEsseenReport { rows, scaled_ratio, improving, centring_z, verdict })
}

/// Convenience wrapper on the projection `S_n·v` of simulated sums.
pub fn clt_from_sums(sums: &BirkhoffSums, centres: &[Vec<f64>], v: &[f64], floor: f64) -> Result<BerryEsseenReport> {
    if v.len() != sums.dim {
        return Err(Error::Parameter(format!("direction has {} components, sums have {}", v.len(), sums.dim)));
    }
    let scalar: Vec<Vec<f64>> = (0..sums.ladder.len()).map(|r| sums.project(r, v)).collect();
    let c: Vec<f64> = centres.iter().map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum()).collect();
    clt_berry_esseen(&scalar, &sums.ladder, &c, floor)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LilRow {
    pub eta: f64,
    pub threshold: f64,
    pub exceedance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LilReport {
    pub n: usize,
    pub sigma2: f64,
    pub rows: Vec<LilRow>,
    /// `None` when `σ² = 0` and the check is skipped.
    pub passed: Option<bool>,
}

/// Default envelope slacks.
pub const LIL_ETAS: [f64; 2] = [0.2, 0.5];

/// Fraction of replicas with `|S_n − centre| > (1 + η) √(2 σ² n log log n)`.
/// A finite-`n` proxy only; the pass rule is `< 5%` at `η = 0.5`.
pub fn lil_envelope(xs: &[f64], n: usize, centre: f64, sigma2: f64, etas: &[f64]) -> LilReport {
    if !(sigma2 > 0.0) || n < 3 {
        return LilReport { n, sigma2, rows: Vec::new(), passed: None };
    }
    let base = (2.0 * sigma2 * n as f64 * (n as f64).ln().ln()).sqrt();
    let rows: Vec<LilRow> = etas
        .iter()
        .map(|&eta| {
            let threshold = (1.0 + eta) * base;
            let hits = xs.iter().filter(|x| (*x - centre).abs() > threshold).count();
            LilRow { eta, threshold, exceedance: hits as f64 / xs.len() as f64 }
        })
        .collect();
    let passed = rows.iter().find(|r| (r.eta - 0.5).abs() < 1e-12).map(|r| r.exceedance < 0.05);
    LilReport { n, sigma2, rows, passed }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoboundaryReport {
    pub ladder: Vec<usize>,
    pub coboundary_var: Vec<f64>,
    pub generic_var: Vec<f64>,
    pub coboundary_slope: f64,
    pub generic_slope: f64,
    /// `4 Var_μ(r) + ε`.
    pub bound: f64,
    pub bounded: bool,
    pub passed: bool,
}

/// Compare the simulated variance growth of a coboundary `r∘T − r` with a
/// generic observable: the former must stay below `4 Var(r) + ε` and grow
/// at most `1e−2` times as fast.
pub fn coboundary_control(
    coboundary: &BirkhoffSums,
    generic: &BirkhoffSums,
    var_r: f64,
    eps: f64,
) -> Result<CoboundaryReport> {
    if coboundary.ladder != generic.ladder {
        return Err(Error::Parameter("both runs must share the ladder".into()));
    }
    let var = |s: &BirkhoffSums| -> Vec<f64> {
        (0..s.ladder.len())
            .map(|r| {
                let xs = s.scalar(r);
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                mean_var(&xs, m).1
            })
            .collect()
    };
    let (cv, gv) = (var(coboundary), var(generic));
    let x: Vec<f64> = coboundary.ladder.iter().map(|&n| n as f64).collect();
    let slope = |v: &[f64]| line_fit(&x, v).map_or(0.0, |f| f.slope);
    let (cs, gs) = (slope(&cv), slope(&gv));
    let bound = 4.0 * var_r + eps;
    let bounded = cv.iter().all(|&v| v <= bound);
    let passed = bounded && cs <= 1e-2 * gs;
    Ok(CoboundaryReport {
        ladder: coboundary.ladder.clone(),
        coboundary_var: cv,
        generic_var: gv,
        coboundary_slope: cs,
        generic_slope: gs,
        bound,
        bounded,
        passed,
    })
}
