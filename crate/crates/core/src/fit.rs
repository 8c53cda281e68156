//! Least-squares helpers shared by the decay checks.

use serde::{Deserialize, Serialize};

/// Straight-line least squares `y ≈ intercept + slope · x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// `None` for fewer than two points or degenerate abscissae.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LineFit { slope, intercept, r2, points: n })
}

/// Fit of `r_n ≈ A δ^n` on the points with `r_n > floor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub delta: f64,
    pub r2: f64,
    pub points: usize,
}

impl ExpFit {
    pub fn rate(&self) -> f64 {
        self.delta.ln()
    }
}

/// Log-linear fit of `values` against `ns`, dropping entries at or below `floor`.
pub fn exp_fit(ns: &[f64], values: &[f64], floor: f64) -> Option<ExpFit> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        ns.iter().zip(values).filter(|(_, &v)| v > floor && v.is_finite()).map(|(&n, &v)| (n, v.ln())).unzip();
    line_fit(&x, &y).map(|f| ExpFit { amplitude: f.intercept.exp(), delta: f.slope.exp(), r2: f.r2, points: f.points })
}
