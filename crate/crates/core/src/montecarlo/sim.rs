use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_zoo::{Fiber, MapFamily, Space};
use crate::rpf::GibbsFamily;
use crate::transfer_op::{Normalized, Transfer};

/// Replica count, horizon ladder and seed of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replicas: usize,
    /// Strictly increasing horizons at which sums are recorded.
    pub ladder: Vec<usize>,
    pub seed: u64,
    /// Starting fiber.
    #[serde(default)]
    pub start: i64,
}

impl SimConfig {
    pub fn new(replicas: usize, ladder: Vec<usize>, seed: u64) -> Result<Self> {
        let cfg = SimConfig { replicas, ladder, seed, start: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Parameter("at least one replica is needed".into()));
        }
        if !self.ladder.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parameter(format!("horizons must increase strictly: {:?}", self.ladder)));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.ladder.last().copied().unwrap_or(0)
    }
}

/// Independent stream for replica `i`: streams never overlap, so results do
/// not depend on how replicas are spread over threads.
pub(crate) fn replica_rng(seed: u64, domain: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(i as u64);
    rng
}

const SAMPLE_DOMAIN: u64 = 1;
const DIGIT_DOMAIN: u64 = 2;

/// Cumulative weights for inverse-CDF cell selection.
pub(crate) struct CellSampler {
    cdf: Vec<f64>,
}

impl CellSampler {
    pub(crate) fn new(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Parameter("cell weights must be non-negative with positive mass".into()));
        }
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(CellSampler { cdf })
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// `N` draws from the grid-discretised `μ_j`: a dual cell by cumulative
/// weight, then a uniform point inside it.
///
/// Below the cell scale the draws are Lebesgue-like. When `μ_j` is
/// singular (any potential other than the geometric one, up to constants)
/// forward orbits relax towards the absolutely continuous invariant law
/// after roughly `log₂ N / log σ` steps, so long simulations need an
/// absolutely continuous `μ_j`.
pub fn sample_initial(gibbs: &GibbsFamily, j: i64, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    let mu = gibbs.mu(j)?;
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("Gibbs weights on fiber {j} sum to {total}, not 1")));
    }
    let cells = CellSampler::new(mu)?;
    let grid = gibbs.grid();
    Ok((0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, SAMPLE_DOMAIN, i);
            let (a, b) = grid.cell(cells.draw(&mut rng));
            grid.space.wrap(a + (b - a) * rng.random::<f64>())
        })
        .collect())
}

/// Birkhoff sums `S_{j,n} u` per replica at every rung of a ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffSums {
    pub ladder: Vec<usize>,
    pub dim: usize,
    pub replicas: usize,
    /// `sums[r][i * dim + a]`: component `a` of replica `i` at rung `r`.
    pub sums: Vec<Vec<f64>>,
}

impl BirkhoffSums {
    pub fn rung(&self, n: usize) -> Option<usize> {
        self.ladder.iter().position(|&m| m == n)
    }

    /// Scalar projection `S_n · v` at rung index `r`.
    pub fn project(&self, r: usize, v: &[f64]) -> Vec<f64> {
        self.sums[r].chunks(self.dim).map(|s| s.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// First component at rung index `r`.
    pub fn scalar(&self, r: usize) -> Vec<f64> {
        self.sums[r].iter().step_by(self.dim).copied().collect()
    }
}

/// Exact orbit of `x ↦ m x mod 1`: the point is the digit string
/// `a / m^K` in base `m`, and each step shifts one digit out and draws a
/// fresh one in — a lazily sampled infinite expansion. Floating-point
/// orbits of these maps collapse onto 0 within about 53 steps.
struct DigitOrbit {
    m: u64,
    a: u64,
    top: u64,
    modulus: u64,
    /// `log2 m` when `m` is a power of two: shifts, masks and buffered bits.
    bits: Option<u32>,
    buffer: u64,
    left: u32,
}

impl DigitOrbit {
    fn new(m: u64, x: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut modulus = 1u64;
        while modulus <= (1u64 << 62) / m {
            modulus *= m;
        }
        // Digits below double precision are not fixed by x; draw them.
        let spread = ((modulus as f64) * f64::EPSILON).ceil().max(1.0) as u64;
        let base = ((x * modulus as f64).floor() as u64).min(modulus - 1);
        let a = (base + rng.random_range(0..spread)).min(modulus - 1);
        let bits = m.is_power_of_two().then(|| m.trailing_zeros());
        DigitOrbit { m, a, top: modulus / m, modulus, bits, buffer: 0, left: 0 }
    }

    #[inline]
    fn x(&self) -> f64 {
        self.a as f64 / self.modulus as f64
    }

    #[inline]
    fn step(&mut self, rng: &mut ChaCha8Rng) {
        match self.bits {
            Some(b) => {
                if self.left < b {
                    self.buffer = rng.random();
                    self.left = 64;
                }
                let digit = self.buffer & (self.m - 1);
                self.buffer >>= b;
                self.left -= b;
                self.a = ((self.a & (self.top - 1)) << b) | digit;
            }
            None => self.a = (self.a % self.top) * self.m + rng.random_range(0..self.m),
        }
    }
}

/// Fibers `j .. j + n`, materialised once (a period suffices when periodic).
pub(crate) struct FiberCache {
    fibers: Vec<Fiber>,
    period: Option<usize>,
}

impl FiberCache {
    pub(crate) fn new(tr: &Transfer, j: i64, n: usize) -> Self {
        let period = tr.system().period();
        let count = period.map_or(n, |p| p.min(n.max(1)));
        FiberCache { fibers: (0..count as i64).map(|k| tr.system().fiber(j + k)).collect(), period }
    }

    /// Number of materialised fibers; indices wrap at this length when periodic.
    pub(crate) fn cycle(&self) -> usize {
        self.fibers.len()
    }

    #[inline]
    pub(crate) fn get(&self, k: usize) -> &Fiber {
        match self.period {
            Some(p) => &self.fibers[k % p],
            None => &self.fibers[k],
        }
    }

    /// The common base `m` when every fiber is the linear map `m x mod 1`.
    fn linear_base(&self) -> Option<u64> {
        let mut base = None;
        for f in &self.fibers {
            match f.map.family() {
                MapFamily::Linear { m } if base.is_none() || base == Some(*m) => base = Some(*m),
                _ => return None,
            }
        }
        base.map(u64::from)
    }
}

fn escaped(space: Space, x: f64) -> bool {
    !x.is_finite() || (space == Space::Interval && !(-1e-12..=1.0 + 1e-12).contains(&x))
}

/// Run every replica forward from `points` (on fiber `cfg.start`) and
/// record `S_n` at each rung.
pub fn birkhoff_sums(tr: &Transfer, points: &[f64], cfg: &SimConfig) -> Result<BirkhoffSums> {
    cfg.validate()?;
    let n_max = cfg.horizon();
    let d = tr.dim();
    let fibers = FiberCache::new(tr, cfg.start, n_max);
    let base = fibers.linear_base();
    let space = tr.system().space();
    let per_replica: Vec<Vec<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(i, &x0)| {
            let mut rng = replica_rng(cfg.seed, DIGIT_DOMAIN, i);
            let mut digits = base.map(|m| DigitOrbit::new(m, x0, &mut rng));
            let mut x = digits.as_ref().map_or(x0, |o| o.x());
            let mut s = vec![0.0; d];
            let mut u = vec![0.0; d];
            let mut out = Vec::with_capacity(cfg.ladder.len() * d);
            let mut rung = 0;
            let mut fi = 0;
            for k in 0..=n_max {
                while rung < cfg.ladder.len() && cfg.ladder[rung] == k {
                    out.extend_from_slice(&s);
                    rung += 1;
                }
                if k == n_max {
                    break;
                }
                let f = fibers.get(fi);
                fi += 1;
                if fi == fibers.cycle() && fibers.period.is_some() {
                    fi = 0;
                }
                f.observable.eval_into(&f.map, x, &mut u);
                s.iter_mut().zip(&u).for_each(|(a, b)| *a += b);
                x = match digits.as_mut() {
                    Some(o) => {
                        o.step(&mut rng);
                        o.x()
                    }
                    None => f.map.forward(x),
                };
                if escaped(space, x) {
                    return Err(Error::OrbitEscaped(format!(
                        "replica {i} reached x = {x} after {} steps from x0 = {x0}",
                        k + 1
                    )));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let sums = (0..cfg.ladder.len())
        .map(|r| per_replica.iter().flat_map(|p| p[r * d..(r + 1) * d].iter().copied()).collect())
        .collect();
    Ok(BirkhoffSums { ladder: cfg.ladder.clone(), dim: d, replicas: points.len(), sums })
}

/// `μ_j(S_{j,n} u) = Σ_{k<n} μ_{j+k}(u_{j+k})` at every rung, by quadrature.
pub fn quadrature_means(tr: &Transfer, gibbs: &GibbsFamily, j: i64, ladder: &[usize]) -> Result<Vec<Vec<f64>>> {
    let norm = Normalized::new(tr, gibbs)?;
    let d = tr.dim();
    let n_max = ladder.last().copied().unwrap_or(0);
    let period = tr.system().period();
    let distinct = period.map_or(n_max, |p| p.min(n_max));
    let per: Vec<Vec<f64>> = (0..distinct as i64).map(|k| norm.mean_observable(j + k)).collect::<Result<_>>()?;
    let mut acc = vec![0.0; d];
    let mut out = Vec::with_capacity(ladder.len());
    let mut rung = 0;
    for k in 0..=n_max {
        while rung < ladder.len() && ladder[rung] == k {
            out.push(acc.clone());
            rung += 1;
        }
        if k < n_max {
            let m = &per[period.map_or(k, |p| k % p)];
            acc.iter_mut().zip(m).for_each(|(a, b)| *a += b);
        }
    }
    Ok(out)
}

/// Sums of i.i.d. standard normal increments on the same ladder: the
/// harness self-test input. Increments between rungs are drawn as one
/// Gaussian of the right variance.
pub fn gaussian_control(cfg: &SimConfig) -> Result<BirkhoffSums> {
    cfg.validate()?;
    use rand_distr::StandardNormal;
    let per: Vec<Vec<f64>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(cfg.seed, SAMPLE_DOMAIN, i);
            let mut s = 0.0;
            let mut prev = 0;
            cfg.ladder
                .iter()
                .map(|&n| {
                    let z: f64 = rng.sample(StandardNormal);
                    s += ((n - prev) as f64).sqrt() * z;
                    prev = n;
                    s
                })
                .collect()
        })
        .collect();
    let sums = (0..cfg.ladder.len()).map(|r| per.iter().map(|p| p[r]).collect()).collect();
    Ok(BirkhoffSums { ladder: cfg.ladder.clone(), dim: 1, replicas: cfg.replicas, sums })
}
