use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hilbert::{hilbert_distance, GeneratingFunctional, TripleSet};
use super::params::{cone_member, sample_cone, ConeParams};
use crate::error::{Error, Result};
use crate::map_zoo::compute_s;
use crate::transfer_op::{holder_seminorm, GridFunction, Transfer};

/// Outcome of the invariance check `v(L g) ≤ ζκ inf(L g)` over samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub fiber: i64,
    pub samples: usize,
    pub passed: usize,
    /// `max v(L g) / (κ inf L g)` over the samples; must stay `≤ ζ`.
    pub worst_ratio: f64,
    pub zeta: f64,
    /// The first violating sample, if any.
    pub witness: Option<GridFunction>,
}

impl InvarianceReport {
    pub fn ok(&self) -> bool {
        self.passed == self.samples
    }
}

fn require_contraction(tr: &Transfer, params: &ConeParams) -> Result<()> {
    let s = compute_s(tr.system());
    if !s.below_one {
        return Err(Error::Precondition(format!("s = {} is not below 1", s.s)));
    }
    if s.s * (1.0 + params.delta_slack) > params.zeta * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "ζ = {} is below s(1 + δ) = {}",
            params.zeta,
            s.s * (1.0 + params.delta_slack)
        )));
    }
    let v_phi = super::params::potential_seminorm(tr.system(), tr.grid());
    if !(v_phi < params.kappa * params.delta_slack) {
        return Err(Error::Precondition(format!(
            "κ = {} too small: sup v(φ) = {v_phi} must be below κδ = {}",
            params.kappa,
            params.kappa * params.delta_slack
        )));
    }
    Ok(())
}

fn zero(tr: &Transfer) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); tr.dim()]
}

/// Apply `L_0^{(j)}` to sampled members of `C_κ` and check that the images
/// land in `C_{ζκ}`.
pub fn check_invariance(
    tr: &Transfer,
    j: i64,
    params: &ConeParams,
    samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    require_contraction(tr, params)?;
    let z = zero(tr);
    let gs = sample_cone(tr.grid(), j, params, samples, seed);
    let ratios: Vec<f64> = gs
        .par_iter()
        .map(|g| {
            let lg = tr.apply(j, &z, g)?;
            Ok(holder_seminorm(&lg, params.alpha) / (params.kappa * lg.min_re()))
        })
        .collect::<Result<_>>()?;
    let bound = params.zeta * (1.0 + 1e-12);
    let passed = ratios.iter().filter(|&&r| r <= bound).count();
    let witness = ratios.iter().position(|&r| r > bound).map(|i| gs[i].clone());
    let worst_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(InvarianceReport { fiber: j, samples, passed, worst_ratio, zeta: params.zeta, witness })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    pub fiber: i64,
    pub samples: usize,
    /// Largest sampled distance; a lower bound for the true diameter.
    pub diameter: f64,
}

/// Largest Hilbert distance in `C_κ` between images `L g₁`, `L g₂` of
/// sampled members.
pub fn estimate_diameter(
    tr: &Transfer,
    j: i64,
    params: &ConeParams,
    samples: usize,
    triples: usize,
    seed: u64,
) -> Result<DiameterReport> {
    let inv = check_invariance(tr, j, params, samples, seed)?;
    if !inv.ok() {
        return Err(Error::Precondition(format!(
            "invariance fails on {} of {} samples (worst ratio {})",
            inv.samples - inv.passed,
            inv.samples,
            inv.worst_ratio
        )));
    }
    let z = zero(tr);
    let images: Vec<GridFunction> =
        sample_cone(tr.grid(), j, params, samples, seed).iter().map(|g| tr.apply(j, &z, g)).collect::<Result<_>>()?;
    let set = TripleSet::new(tr.grid(), params.alpha, triples, seed ^ 0xd1a);
    let diameter = set_diameter(&images, params, &set);
    if !diameter.is_finite() {
        return Err(Error::Numeric("an image pair is at infinite Hilbert distance despite invariance".into()));
    }
    Ok(DiameterReport { fiber: j, samples, diameter })
}

/// Largest pairwise Hilbert distance within a family of functions.
pub fn set_diameter(functions: &[GridFunction], params: &ConeParams, triples: &TripleSet) -> f64 {
    let n = functions.len();
    (0..n)
        .into_par_iter()
        .map(|a| {
            (a + 1..n)
                .map(|b| hilbert_distance(&functions[a], &functions[b], params, triples).value())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApertureReport {
    pub samples: usize,
    pub passed: usize,
    /// `max ‖g‖ / ((1 + 2κ) g(a))`.
    pub worst_ratio: f64,
}

/// `‖g‖ ≤ (1 + 2κ) g(a)` for every sample, at the grid node `anchor`.
pub fn check_aperture(samples: &[GridFunction], params: &ConeParams, anchor: usize) -> ApertureReport {
    let ratios: Vec<f64> =
        samples.iter().map(|g| g.norm(params.alpha) / ((1.0 + 2.0 * params.kappa) * g.values[anchor].re)).collect();
    ApertureReport {
        samples: samples.len(),
        passed: ratios.iter().filter(|&&r| r <= 1.0 + 1e-12).count(),
        worst_ratio: ratios.iter().cloned().fold(0.0, f64::max),
    }
}

/// One piece `coefficient · member` of a reproducing decomposition, with
/// `member ∈ C_κ` and `coefficient ∈ {±1, ±i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub member: GridFunction,
    pub coefficient: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub parts: Vec<Part>,
    /// `Σ ‖part‖`.
    pub norm_sum: f64,
    /// `3(1 + 1/κ)‖g‖`, doubled for complex input.
    pub bound: f64,
}

impl Decomposition {
    pub fn resum(&self, template: &GridFunction) -> GridFunction {
        let mut acc = template.scale(Complex64::new(0.0, 0.0));
        for p in &self.parts {
            acc = acc.add(&p.member.scale(p.coefficient));
        }
        acc
    }

    pub fn within_bound(&self) -> bool {
        self.norm_sum <= self.bound * (1.0 + 1e-12)
    }
}

/// Write `g = Σ c_i g_i` with `g_i ∈ C_κ`. Real `g` outside the cone splits
/// as `(g + c_g) − c_g` with `c_g = sup|g| + v(g)/κ`; complex `g` is handled
/// through its real and imaginary parts.
pub fn cone_decompose(g: &GridFunction, params: &ConeParams) -> Decomposition {
    let alpha = params.alpha;
    let complex = g.max_im() != 0.0;
    let re = g.map(|v| Complex64::new(v.re, 0.0));
    let im = g.map(|v| Complex64::new(v.im, 0.0));
    let mut parts = Vec::new();
    real_parts(&re, params, Complex64::new(1.0, 0.0), &mut parts);
    real_parts(&im, params, Complex64::new(0.0, 1.0), &mut parts);
    let norm_sum = parts.iter().map(|p| p.member.norm(alpha)).sum();
    let factor = if complex { 2.0 } else { 1.0 };
    let bound = factor * 3.0 * (1.0 + 1.0 / params.kappa) * g.norm(alpha);
    Decomposition { parts, norm_sum, bound }
}

fn real_parts(g: &GridFunction, params: &ConeParams, unit: Complex64, out: &mut Vec<Part>) {
    if g.sup_norm() == 0.0 {
        return;
    }
    if cone_member(g, params).member {
        out.push(Part { member: g.clone(), coefficient: unit });
        return;
    }
    let c = g.sup_norm() + holder_seminorm(g, params.alpha) / params.kappa;
    out.push(Part { member: g.map(|v| v + c), coefficient: unit });
    out.push(Part { member: GridFunction::constant(g.fiber, g.grid, c.into()), coefficient: -unit });
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationLevel {
    pub modulus: f64,
    /// `max |s(L_z g − L_0 g)| / (|z| s(L_0 g))` over samples, triples and directions.
    pub c_hat: f64,
    pub discarded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub fiber: i64,
    pub levels: Vec<PerturbationLevel>,
    /// Largest ratio of `c_hat` between consecutive levels (≥ 1).
    pub max_level_ratio: f64,
}

/// Settings of [`check_perturbation`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Moduli `|z| ≤ 1`; each is probed along several complex directions.
    pub moduli: Vec<f64>,
    pub samples: usize,
    pub triples: usize,
    pub seed: u64,
    /// Replace `u_j` by `u_j − centre`, i.e. multiply `L_z` by `e^{−z·centre}`.
    pub centre: Option<Vec<f64>>,
}

/// Directions in the first coordinate along which each modulus is probed.
const DIRECTIONS: usize = 4;

/// Empirical constant of the comparison `|s(L_z g − L_0 g)| ≤ c|z| s(L_0 g)`.
/// Triples with `s(L_0 g) = 0` lie on the boundary of the generating set and
/// are discarded.
pub fn check_perturbation(
    tr: &Transfer,
    j: i64,
    params: &ConeParams,
    cfg: &PerturbationConfig,
) -> Result<PerturbationReport> {
    if let Some(&bad) = cfg.moduli.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::Parameter(format!("perturbation moduli must lie in (0, 1], got {bad}")));
    }
    let dim = tr.dim();
    let gs = sample_cone(tr.grid(), j, params, cfg.samples, cfg.seed);
    let set = TripleSet::new(tr.grid(), params.alpha, cfg.triples, cfg.seed ^ 0x9e7);
    let z0 = zero(tr);
    let base: Vec<GridFunction> = gs.iter().map(|g| tr.apply(j, &z0, g)).collect::<Result<_>>()?;
    let mut levels = Vec::with_capacity(cfg.moduli.len());
    for &r in &cfg.moduli {
        let mut c_hat = 0.0f64;
        let mut discarded = 0;
        for d in 0..DIRECTIONS {
            let w = Complex64::from_polar(r, std::f64::consts::PI * (2 * d + 1) as f64 / (2 * DIRECTIONS) as f64);
            let mut z = vec![Complex64::new(0.0, 0.0); dim];
            z[0] = w;
            let phase = match &cfg.centre {
                Some(c) => (-z.iter().zip(c).map(|(a, b)| a * b).sum::<Complex64>()).exp(),
                None => Complex64::new(1.0, 0.0),
            };
            for (g, l0) in gs.iter().zip(&base) {
                let lz = tr.apply(j, &z, g)?.scale(phase);
                let diff = lz.sub(l0);
                set.for_each_pair_value(&diff.values, &l0.values, params.kappa, |num, den| {
                    if den.re <= 0.0 {
                        discarded += 1;
                    } else {
                        c_hat = c_hat.max(num.norm() / (r * den.re));
                    }
                });
            }
        }
        levels.push(PerturbationLevel { modulus: r, c_hat, discarded });
    }
    let max_level_ratio = levels
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].c_hat, w[1].c_hat);
            if a == 0.0 && b == 0.0 {
                1.0
            } else {
                a.max(b) / a.min(b)
            }
        })
        .fold(1.0, f64::max);
    Ok(PerturbationReport { fiber: j, levels, max_level_ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexConeReport {
    pub pairs: usize,
    /// `min Re(conj(s₁(g)) s₂(g))` over the sampled functional pairs.
    pub worst: f64,
    pub witness: Option<(GeneratingFunctional, GeneratingFunctional)>,
}

impl ComplexConeReport {
    /// The necessary condition held on every sampled pair.
    pub fn passes(&self) -> bool {
        self.worst >= 0.0
    }
}

/// Sampled necessary condition for membership in the complexified cone:
/// `Re(conj(s₁(g)) s₂(g)) ≥ 0` for random pairs of generating functionals.
/// Passing does not prove membership.
pub fn check_complex_necessary(
    g: &GridFunction,
    params: &ConeParams,
    triples: &TripleSet,
    pairs: usize,
    seed: u64,
) -> ComplexConeReport {
    let mut values = Vec::with_capacity(triples.len());
    triples.for_each_value(&g.values, params.kappa, |s, v| values.push((s, v)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut check = |(s1, v1): (GeneratingFunctional, Complex64), (s2, v2): (GeneratingFunctional, Complex64)| {
        let p = (v1.conj() * v2).re;
        if p < worst {
            worst = p;
            if p < 0.0 {
                witness = Some((s1, s2));
            }
        }
    };
    // Extremal arguments are the most likely to violate the condition.
    let by_arg = |a: &&(GeneratingFunctional, Complex64), b: &&(GeneratingFunctional, Complex64)| {
        a.1.arg().total_cmp(&b.1.arg())
    };
    if let (Some(&lo), Some(&hi)) = (values.iter().min_by(by_arg), values.iter().max_by(by_arg)) {
        check(lo, hi);
    }
    for _ in 0..pairs {
        let (a, b) = (rng.random_range(0..values.len()), rng.random_range(0..values.len()));
        check(values[a], values[b]);
    }
    ComplexConeReport { pairs: pairs + 1, worst, witness }
}
