use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rpf::{solve_family, GibbsFamily, RpfFamily, RpfOptions};
use crate::transfer_op::{Normalized, Transfer};

/// Finite-difference settings for pressure derivatives at `z = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureOptions {
    /// Base step `h`; derivatives combine steps `h` and `h/2` (Richardson).
    pub step: f64,
    pub rpf: RpfOptions,
}

impl Default for PressureOptions {
    fn default() -> Self {
        PressureOptions { step: 1e-3, rpf: RpfOptions::default() }
    }
}

/// Per-fiber centred pressure increments
/// `π_k(z) = log(λ_k(z)/λ_k(0)) − z·μ_k(u_k)` along a block.
///
/// Subtracting `log λ_k(0)` normalises (`Π(0) = 0`); subtracting `z·μ_k(u_k)`
/// centres the observable. Each logarithm is taken on the branch through 0
/// and refused if `λ_k(z)/λ_k(0)` leaves the right half-plane.
pub struct PressureSampler<'a> {
    tr: &'a Transfer,
    base: &'a GibbsFamily,
    means: Vec<Vec<f64>>,
    start: i64,
    len: usize,
    opts: RpfOptions,
}

impl<'a> PressureSampler<'a> {
    /// `base` must hold the `z = 0` family on `start ..= start + len`.
    pub fn new(tr: &'a Transfer, base: &'a GibbsFamily, start: i64, len: usize, opts: RpfOptions) -> Result<Self> {
        let norm = Normalized::new(tr, base)?;
        let means = (0..len as i64).map(|k| norm.transported_mean(start + k)).collect::<Result<_>>()?;
        Ok(PressureSampler { tr, base, means, start, len, opts })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Centring constants `μ_{start+k}(u_{start+k})` (transported form).
    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// `π_{start+k}(z)` for `k = 0 .. len`.
    pub fn increments(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        if z.iter().all(|w| w.norm() == 0.0) {
            return Ok(vec![Complex64::new(0.0, 0.0); self.len]);
        }
        let fam: RpfFamily = solve_family(self.tr, self.start, self.len + 1, z, &self.opts)?;
        // Gauge ν⁰_k(h_k(z)) = 1: rescaling h_k by c_k turns λ_k into
        // λ_k c_{k+1} / c_k, which leaves block products unchanged up to the
        // two end factors and makes ∂_z log λ_k(0) exactly the transported mean.
        let anchor = |j: i64| -> Result<Complex64> { Ok(fam.get(j)?.h.pair(&self.base.rpf.get(j)?.nu)) };
        (0..self.len)
            .map(|k| {
                let j = self.start + k as i64;
                let ratio = fam.get(j)?.lambda * anchor(j + 1)? / (anchor(j)? * self.base.lambda(j)?);
                if ratio.re <= 0.0 {
                    return Err(Error::BranchCut { fiber: j, arg: ratio.arg() });
                }
                let shift: Complex64 = z.iter().zip(&self.means[k]).map(|(a, m)| a * m).sum();
                Ok(ratio.ln() - shift)
            })
            .collect()
    }

    /// `Π_{start,n}(z)` for every `n = 1 ..= len`.
    pub fn prefix(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let inc = self.increments(z)?;
        let mut acc = Complex64::new(0.0, 0.0);
        Ok(inc
            .into_iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect())
    }
}

/// `Π_{j,n}(z)`, normalised and centred.
pub fn pressure(
    tr: &Transfer,
    base: &GibbsFamily,
    j: i64,
    n: usize,
    z: &[Complex64],
    opts: &RpfOptions,
) -> Result<Complex64> {
    let s = PressureSampler::new(tr, base, j, n, *opts)?;
    Ok(s.prefix(z)?.last().copied().unwrap_or_default())
}

/// Pressure derivatives of one block `Π_{j,n}` at `z = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureBlock {
    pub start: i64,
    pub len: usize,
    pub step: f64,
    pub gradient: Vec<f64>,
    /// Row-major `d × d`.
    pub hessian: Vec<f64>,
    /// Fourth-order five-point stencil (steps `h`, `2h`), for step-size robustness.
    pub hessian_five_point: Vec<f64>,
}

impl PressureBlock {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// Largest entrywise relative gap between the two Hessian estimates.
    pub fn stencil_gap(&self) -> f64 {
        let scale = self.hessian.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        self.hessian.iter().zip(&self.hessian_five_point).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
    }
}

/// Derivatives at 0 for every prefix length `n = 1 ..= len`.
pub fn pressure_blocks(sampler: &PressureSampler, opts: &PressureOptions) -> Result<Vec<PressureBlock>> {
    let d = sampler.tr.dim();
    let h = opts.step;
    let len = sampler.len;
    // Offsets (in units of h) needed: ±1/2, ±1, ±2 along axes; (±1/2, ±1/2), (±1, ±1), (±2, ±2) on diagonals.
    let mut points: Vec<Vec<f64>> = Vec::new();
    let scales = [0.5, 1.0, 2.0];
    for a in 0..d {
        for &s in &scales {
            for sign in [1.0, -1.0] {
                let mut p = vec![0.0; d];
                p[a] = sign * s;
                points.push(p);
            }
        }
        for b in a + 1..d {
            for &s in &scales {
                for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut p = vec![0.0; d];
                    p[a] = sa * s;
                    p[b] = sb * s;
                    points.push(p);
                }
            }
        }
    }
    let values: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| {
            let z: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x * h, 0.0)).collect();
            Ok(sampler.prefix(&z)?.into_iter().map(|v| v.re).collect())
        })
        .collect::<Result<_>>()?;
    let lookup = |p: &[f64], n: usize| -> f64 {
        if p.iter().all(|&x| x == 0.0) {
            return 0.0;
        }
        let i = points.iter().position(|q| q.as_slice() == p).expect("stencil point");
        values[i][n]
    };
    let axis = |a: usize, s: f64| {
        let mut p = vec![0.0; d];
        p[a] = s;
        p
    };
    let diag = |a: usize, b: usize, sa: f64, sb: f64| {
        let mut p = vec![0.0; d];
        p[a] = sa;
        p[b] = sb;
        p
    };
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let f = |p: Vec<f64>| lookup(&p, n);
        let mut gradient = vec![0.0; d];
        let mut hessian = vec![0.0; d * d];
        let mut five = vec![0.0; d * d];
        for a in 0..d {
            let g = |s: f64| (f(axis(a, s)) - f(axis(a, -s))) / (2.0 * s * h);
            gradient[a] = (4.0 * g(0.5) - g(1.0)) / 3.0;
            let second = |s: f64| (f(axis(a, s)) + f(axis(a, -s))) / (s * h).powi(2);
            hessian[a * d + a] = (4.0 * second(0.5) - second(1.0)) / 3.0;
            five[a * d + a] = (-f(axis(a, 2.0)) + 16.0 * f(axis(a, 1.0)) + 16.0 * f(axis(a, -1.0)) - f(axis(a, -2.0)))
                / (12.0 * h * h);
            for b in a + 1..d {
                let mixed = |s: f64| {
                    (f(diag(a, b, s, s)) - f(diag(a, b, s, -s)) - f(diag(a, b, -s, s)) + f(diag(a, b, -s, -s)))
                        / (4.0 * (s * h).powi(2))
                };
                let m = (4.0 * mixed(0.5) - mixed(1.0)) / 3.0;
                let m5 = (4.0 * mixed(1.0) - mixed(2.0)) / 3.0;
                hessian[a * d + b] = m;
                hessian[b * d + a] = m;
                five[a * d + b] = m5;
                five[b * d + a] = m5;
            }
        }
        out.push(PressureBlock {
            start: sampler.start,
            len: n + 1,
            step: h,
            gradient,
            hessian,
            hessian_five_point: five,
        });
    }
    Ok(out)
}

/// Derivatives of `Π_{j,n}` at 0 for a single block length.
pub fn pressure_block(
    tr: &Transfer,
    base: &GibbsFamily,
    j: i64,
    n: usize,
    opts: &PressureOptions,
) -> Result<PressureBlock> {
    let s = PressureSampler::new(tr, base, j, n, opts.rpf)?;
    Ok(pressure_blocks(&s, opts)?.pop().expect("n ≥ 1"))
}

/// `(t, |Π_{j,n}(it e₁) + ½ H₁₁ t²| / (|t|³ n))` on a segment of imaginary
/// parameters: bounded values confirm the cubic Taylor remainder.
pub fn taylor_remainders(sampler: &PressureSampler, block: &PressureBlock, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
    let d = block.dim();
    let n = block.len;
    ts.iter()
        .map(|&t| {
            let mut z = vec![Complex64::new(0.0, 0.0); d];
            z[0] = Complex64::new(0.0, t);
            let p = sampler.prefix(&z)?[n - 1];
            let r = (p + 0.5 * block.hessian[0] * t * t).norm();
            Ok((t, r / (t.abs().powi(3) * n as f64)))
        })
        .collect()
}
