use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::map::MapModel;
use super::system::SequentialSystem;
use super::Space;
use crate::error::{Error, Result};

/// Slack allowed between sampled inverse-branch ratios and the declared bounds.
pub const PAIRING_TOL: f64 = 1e-8;

/// Smallest separation, relative to the preimage magnitude, at which a ratio is trusted.
const RESOLUTION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub d: usize,
    pub q: usize,
    /// Largest sampled ratio over the bad branches (0 if there are none).
    pub l_hat: f64,
    /// Reciprocal of the largest sampled ratio over the good branches.
    pub sigma_hat: f64,
    pub declared_l: f64,
    pub declared_sigma: f64,
    /// Largest sampled ratio `ρ(x_i, x'_i)/ρ(x, x')` per branch.
    pub branch_max: Vec<f64>,
    pub pairs: usize,
    pub consistent: bool,
}

/// Sample pairs `(x, x')`, pair up their preimages branch by branch and
/// record `ρ(x_i, x'_i) / ρ(x, x')`.
///
/// A third of the pairs are uniform, a third are close pairs at
/// log-uniform separation, and a third crowd the left endpoint, where
/// neutral fixed points make the bad-branch ratio approach its bound.
pub fn verify_pairing(map: &MapModel, samples: usize, seed: u64) -> Result<PairingReport> {
    if samples == 0 {
        return Err(Error::Parameter("verify_pairing needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = map.space();
    let d = map.degree();
    let mut branch_max = vec![0.0f64; d];
    let branches = map.branches();
    let mut pairs = 0;
    for k in 0..samples {
        let (x, xp) = match k % 3 {
            0 => (rng.random::<f64>(), rng.random::<f64>()),
            1 => {
                let x = rng.random::<f64>();
                let h = 10f64.powf(-rng.random_range(1.0..6.0));
                (x, space.wrap(if rng.random::<bool>() { x + h } else { x - h }).clamp(0.0, 1.0))
            }
            _ => {
                let x = 10f64.powf(-rng.random_range(1.0..12.0));
                (x, x * (1.0 + 10f64.powf(-rng.random_range(1.0..6.0))))
            }
        };
        let dist = space.distance(x, xp);
        if dist == 0.0 {
            continue;
        }
        let a = map.preimages(x)?;
        let b = map.preimages(xp)?;
        if a.len() != b.len() {
            return Err(Error::Numeric(format!(
                "preimage counts differ: {} at x={x}, {} at x'={xp}",
                a.len(),
                b.len()
            )));
        }
        // On the circle the branch labels of nearby points can be shifted by one
        // when the pair straddles 0; pick the cyclic shift that pairs closest.
        let shift = match space {
            Space::Interval => 0,
            Space::Circle => (0..d)
                .min_by(|&s, &t| {
                    let cost = |s: usize| (0..d).map(|i| space.distance(a[i], b[(i + s) % d])).sum::<f64>();
                    cost(s).total_cmp(&cost(t))
                })
                .unwrap_or(0),
        };
        for i in 0..d {
            let (y, yp) = (a[i], b[(i + shift) % d]);
            // Preimages far from the origin carry absolute rounding error; skip
            // branches where that error would swamp the separation.
            if dist < RESOLUTION * y.abs().max(yp.abs()) {
                continue;
            }
            // A pair straddling 0 on the circle maps to an arc crossing a branch
            // boundary; charge it to the weaker of the two branches involved.
            let (bi, bj) = (map.branch_of(y), map.branch_of(yp));
            let target = if branches[bi].bad {
                bi
            } else if branches[bj].bad {
                bj
            } else {
                i
            };
            branch_max[target] = branch_max[target].max(space.distance(y, yp) / dist);
        }
        pairs += 1;
    }
    let l_hat = (0..d).filter(|&i| branches[i].bad).map(|i| branch_max[i]).fold(0.0, f64::max);
    let good_max = (0..d).filter(|&i| !branches[i].bad).map(|i| branch_max[i]).fold(0.0, f64::max);
    let consistent = (0..d).all(|i| {
        let bound = if branches[i].bad { map.l_bound() } else { 1.0 / map.sigma() };
        branch_max[i] <= bound + PAIRING_TOL
    });
    Ok(PairingReport {
        d,
        q: map.bad_count(),
        l_hat,
        sigma_hat: if good_max > 0.0 { 1.0 / good_max } else { f64::INFINITY },
        declared_l: map.l_bound(),
        declared_sigma: map.sigma(),
        branch_max,
        pairs,
        consistent,
    })
}

/// `e^ε (q L^α + (d − q) σ^{−α}) / d`.
pub fn contraction_factor(d: usize, q: usize, l: f64, sigma: f64, alpha: f64, eps: f64) -> f64 {
    eps.exp() * (q as f64 * l.powf(alpha) + (d - q) as f64 * sigma.powf(-alpha)) / d as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SReport {
    pub s: f64,
    pub below_one: bool,
    /// Index attaining the supremum.
    pub worst_fiber: i64,
    /// Largest ε such that a constant oscillation bound still gives `s < 1`.
    pub max_admissible_epsilon: f64,
}

/// The contraction parameter `s = sup_j e^{ε_j}(q_j L_j^α + (d_j − q_j) σ_j^{−α})/d_j`,
/// the supremum taken over the materialised window.
pub fn compute_s(system: &SequentialSystem) -> SReport {
    let alpha = system.alpha();
    let mut s = f64::NEG_INFINITY;
    let mut worst = 0;
    let mut base_max = f64::NEG_INFINITY;
    for j in system.window() {
        let f = system.fiber(j);
        let m = &f.map;
        let base = contraction_factor(m.degree(), m.bad_count(), m.l_bound(), m.sigma(), alpha, 0.0);
        let sj = base * system.epsilon(j).exp();
        base_max = base_max.max(base);
        if sj > s {
            s = sj;
            worst = j;
        }
    }
    SReport { s, below_one: s < 1.0, worst_fiber: worst, max_admissible_epsilon: -base_max.ln() }
}
