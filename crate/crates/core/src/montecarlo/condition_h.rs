use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::sim::{birkhoff_sums, quadrature_means, sample_initial, SimConfig};
use crate::error::{Error, Result};
use crate::fit::{exp_fit, ExpFit};
use crate::rpf::GibbsFamily;
use crate::transfer_op::{Normalized, Transfer};

/// Two groups of consecutive blocks separated by a gap of `k` fibers.
///
/// Block `i` of the first group covers fibers `[i b, (i+1) b)`; the second
/// group starts at `n b + k`. Each block carries its own `t_i`, applied
/// along `direction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPattern {
    pub block_len: usize,
    pub first: usize,
    pub second: usize,
    /// `t_i` for the `first + second` blocks, in order.
    pub ts: Vec<f64>,
    pub direction: Option<Vec<f64>>,
}

impl BlockPattern {
    /// `n = m = 1` single blocks with a common `t`.
    pub fn single(block_len: usize, t: f64) -> Self {
        BlockPattern { block_len, first: 1, second: 1, ts: vec![t, t], direction: None }
    }

    fn validate(&self, d: usize, eps0: f64) -> Result<Vec<f64>> {
        if self.block_len == 0 || self.first == 0 || self.second == 0 {
            return Err(Error::Parameter("blocks and groups must be non-empty".into()));
        }
        if self.ts.len() != self.first + self.second {
            return Err(Error::Parameter(format!(
                "{} block parameters for {} blocks",
                self.ts.len(),
                self.first + self.second
            )));
        }
        if let Some(t) = self.ts.iter().find(|t| t.abs() > eps0) {
            return Err(Error::Parameter(format!("|t| = {} exceeds ε₀ = {eps0}", t.abs())));
        }
        match &self.direction {
            Some(v) if v.len() == d => Ok(v.clone()),
            Some(v) => Err(Error::Parameter(format!("direction has {} components, observable has {d}", v.len()))),
            None => {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                Ok(e)
            }
        }
    }

    fn span(&self, group: usize) -> usize {
        self.block_len * if group == 0 { self.first } else { self.second }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HGapRow {
    pub k: usize,
    pub joint: Complex64,
    pub product: Complex64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HGapReport {
    pub pattern: BlockPattern,
    pub rows: Vec<HGapRow>,
    /// Exponential fit of `gap(k)` over the entries above the noise floor.
    pub fit: Option<ExpFit>,
}

impl HGapReport {
    pub fn gap(&self, k: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.gap)
    }

    /// `ln δ` of the fit; `−∞` when every gap is at the floor.
    pub fn rate(&self) -> f64 {
        match &self.fit {
            Some(f) => f.rate(),
            None if self.rows.iter().all(|r| r.gap <= GAP_FLOOR) => f64::NEG_INFINITY,
            None => f64::NAN,
        }
    }
}

/// Gaps at or below this are roundoff and excluded from the fit.
pub const GAP_FLOOR: f64 = 1e-14;

fn apply_group(
    norm: &Normalized,
    start: i64,
    pattern: &BlockPattern,
    group: usize,
    v: &[f64],
    g: &mut Vec<Complex64>,
) -> Result<()> {
    let offset = if group == 0 { 0 } else { pattern.first };
    let blocks = if group == 0 { pattern.first } else { pattern.second };
    for b in 0..blocks {
        let t = pattern.ts[offset + b];
        let tv: Vec<f64> = v.iter().map(|x| x * t).collect();
        for s in 0..pattern.block_len as i64 {
            *g = norm.step(start + (b * pattern.block_len) as i64 + s, &tv)?.apply(g);
        }
    }
    Ok(())
}

fn expect(gibbs: &GibbsFamily, j: i64, g: &[Complex64]) -> Result<Complex64> {
    Ok(g.iter().zip(gibbs.mu(j)?).map(|(a, m)| a * m).sum())
}

/// `gap(k) = |E e^{i(A + B)} − E e^{iA} E e^{iB}|` for `k = 1 ..= k_max`, by
/// quadrature through the centred normalised operators. `A`, `B` are the
/// `t`-weighted block sums of the two groups.
pub fn condition_h_gap(
    tr: &Transfer,
    gibbs: &GibbsFamily,
    pattern: &BlockPattern,
    k_max: usize,
    eps0: f64,
) -> Result<HGapReport> {
    let v = pattern.validate(tr.dim(), eps0)?;
    let norm = Normalized::new(tr, gibbs)?.centred();
    let len = tr.grid().len();
    let one = vec![Complex64::new(1.0, 0.0); len];
    let (na, nb) = (pattern.span(0) as i64, pattern.span(1) as i64);
    let zero = vec![0.0; tr.dim()];

    let mut ga = one.clone();
    apply_group(&norm, 0, pattern, 0, &v, &mut ga)?;
    let char_a = expect(gibbs, na, &ga)?;

    let mut rows = Vec::with_capacity(k_max);
    let mut gap_fn = ga;
    for k in 1..=k_max as i64 {
        gap_fn = norm.step(na + k - 1, &zero)?.apply(&gap_fn);
        let b0 = na + k;
        let mut joint = gap_fn.clone();
        apply_group(&norm, b0, pattern, 1, &v, &mut joint)?;
        let joint = expect(gibbs, b0 + nb, &joint)?;
        let mut gb = one.clone();
        apply_group(&norm, b0, pattern, 1, &v, &mut gb)?;
        let product = char_a * expect(gibbs, b0 + nb, &gb)?;
        rows.push(HGapRow { k: k as usize, joint, product, gap: (joint - product).norm() });
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let fit = exp_fit(&ks, &gaps, GAP_FLOOR);
    Ok(HGapReport { pattern: pattern.clone(), rows, fit })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharCheck {
    pub name: String,
    pub quadrature: Complex64,
    pub monte_carlo: Complex64,
    pub std_error: f64,
    /// `|quadrature − MC| / std_error`.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HCrossCheck {
    pub k: usize,
    pub checks: Vec<CharCheck>,
}

impl HCrossCheck {
    pub fn within(&self, sigmas: f64) -> bool {
        self.checks.iter().all(|c| c.z <= sigmas)
    }
}

fn complex_mean(vals: &[Complex64]) -> (Complex64, f64) {
    let n = vals.len() as f64;
    let m: Complex64 = vals.iter().sum::<Complex64>() / n;
    let var = vals.iter().map(|v| (v - m).norm_sqr()).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Monte Carlo estimates of `E e^{iA}`, `E e^{iB}` and `E e^{i(A+B)}` at one
/// gap `k`, compared with the quadrature values.
pub fn condition_h_cross_check(
    tr: &Transfer,
    gibbs: &GibbsFamily,
    pattern: &BlockPattern,
    k: usize,
    eps0: f64,
    replicas: usize,
    seed: u64,
) -> Result<HCrossCheck> {
    let v = pattern.validate(tr.dim(), eps0)?;
    let quad = condition_h_gap(tr, gibbs, pattern, k, eps0)?;
    let row = quad.rows.last().expect("k ≥ 1").clone();
    let char_a = {
        let norm = Normalized::new(tr, gibbs)?.centred();
        let mut g = vec![Complex64::new(1.0, 0.0); tr.grid().len()];
        apply_group(&norm, 0, pattern, 0, &v, &mut g)?;
        expect(gibbs, pattern.span(0) as i64, &g)?
    };
    let char_b = row.product / char_a;

    // Ladder at every block boundary of both groups.
    let b = pattern.block_len;
    let b0 = pattern.span(0) + k;
    let mut ladder: Vec<usize> = (0..=pattern.first).map(|i| i * b).collect();
    ladder.extend((0..=pattern.second).map(|i| b0 + i * b));
    ladder.dedup();
    let cfg = SimConfig::new(replicas, ladder.clone(), seed)?;
    let points = sample_initial(gibbs, 0, replicas, seed)?;
    let sums = birkhoff_sums(tr, &points, &cfg)?;
    let centres = quadrature_means(tr, gibbs, 0, &ladder)?;
    let rung = |n: usize| sums.rung(n).expect("ladder rung");
    let proj = |r: usize| -> Vec<f64> {
        let c: f64 = centres[r].iter().zip(&v).map(|(a, b)| a * b).sum();
        sums.project(r, &v).into_iter().map(|s| s - c).collect()
    };
    let block_sum = |from: usize, blocks: usize, t0: usize| -> Vec<f64> {
        let mut acc = vec![0.0; replicas];
        for i in 0..blocks {
            let (lo, hi) = (proj(rung(from + i * b)), proj(rung(from + (i + 1) * b)));
            let t = pattern.ts[t0 + i];
            acc.iter_mut().zip(hi.iter().zip(&lo)).for_each(|(a, (h, l))| *a += t * (h - l));
        }
        acc
    };
    let a = block_sum(0, pattern.first, 0);
    let bb = block_sum(b0, pattern.second, pattern.first);
    let phase = |xs: &[f64]| -> Vec<Complex64> { xs.iter().map(|&x| Complex64::from_polar(1.0, x)).collect() };
    let sum: Vec<f64> = a.iter().zip(&bb).map(|(x, y)| x + y).collect();
    let mut checks = Vec::new();
    for (name, q, vals) in [("A", char_a, phase(&a)), ("B", char_b, phase(&bb)), ("A+B", row.joint, phase(&sum))] {
        let (m, se) = complex_mean(&vals);
        checks.push(CharCheck {
            name: name.into(),
            quadrature: q,
            monte_carlo: m,
            std_error: se,
            z: (q - m).norm() / se.max(1e-300),
        });
    }
    Ok(HCrossCheck { k, checks })
}
