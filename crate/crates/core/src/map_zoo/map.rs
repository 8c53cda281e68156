use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::root::solve_increasing;
use super::Space;
use crate::error::{Error, Result};

/// Preimages of a point; the zoo has no map with more than a handful of branches.
pub type Preimages = SmallVec<[f64; 4]>;

/// One full branch of a piecewise map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    /// Declared "bad" branch: the inverse may fail to contract.
    pub bad: bool,
    /// Declared Lipschitz bound of the inverse branch.
    pub inverse_lipschitz: f64,
}

/// Smooth bump added to the first branch of `m x mod 1`.
///
/// In the branch coordinate `s = m x ∈ [0, 1]` the branch becomes
/// `s + D(s)` with `D'(s) = a (cos 2πr − cos 4πr)`, `r = (s − c + w) / 2w`,
/// supported on `[c − w, c + w]`. `D` vanishes with its derivative at both
/// ends of the support, so the branch still maps onto the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    /// Bump occupying the whole branch.
    pub fn full(amplitude: f64) -> Self {
        Bump { amplitude, center: 0.5, width: 0.5 }
    }

    /// The amplitude that brings the slope of `m x mod 1`'s first branch
    /// down to `min_slope` (for `min_slope < m`).
    pub fn for_min_slope(m: u32, min_slope: f64) -> Self {
        Bump::full((1.0 - min_slope / m as f64) / 2.0)
    }

    fn local(&self, s: f64) -> Option<f64> {
        let a = self.center - self.width;
        let r = (s - a) / (2.0 * self.width);
        (0.0..=1.0).contains(&r).then_some(r)
    }

    fn offset(&self, s: f64) -> f64 {
        use std::f64::consts::PI;
        match self.local(s) {
            Some(r) => {
                2.0 * self.width
                    * self.amplitude
                    * ((2.0 * PI * r).sin() / (2.0 * PI) - (4.0 * PI * r).sin() / (4.0 * PI))
            }
            None => 0.0,
        }
    }

    fn slope(&self, s: f64) -> f64 {
        use std::f64::consts::PI;
        match self.local(s) {
            Some(r) => self.amplitude * ((2.0 * PI * r).cos() - (4.0 * PI * r).cos()),
            None => 0.0,
        }
    }

    /// Range of `1 + D'`: `cos θ − cos 2θ` spans `[−2, 9/8]`.
    fn slope_factor_range(&self) -> (f64, f64) {
        let a = self.amplitude;
        if a >= 0.0 {
            (1.0 - 2.0 * a, 1.0 + 9.0 * a / 8.0)
        } else {
            (1.0 + 9.0 * a / 8.0, 1.0 - 2.0 * a)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MapFamily {
    Linear { m: u32 },
    Perturbed { m: u32, bump: Bump },
    MannevillePomeau { beta: f64 },
}

/// A full-branch map of `[0, 1]` or the circle together with its declared
/// expansion classification `(d, q, L, σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapModel {
    family: MapFamily,
    space: Space,
    branches: Vec<Branch>,
    l_bound: f64,
    sigma: f64,
}

/// `x (1 + 2^β x^β)` on `[0, 1/2]` and `2x − 1` on `(1/2, 1]`.
pub fn make_mp_map(beta: f64) -> Result<MapModel> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Parameter(format!("Manneville-Pomeau exponent must lie in (0,1), got {beta}")));
    }
    Ok(MapModel {
        family: MapFamily::MannevillePomeau { beta },
        space: Space::Interval,
        branches: vec![
            Branch { lo: 0.0, hi: 0.5, bad: true, inverse_lipschitz: 1.0 },
            Branch { lo: 0.5, hi: 1.0, bad: false, inverse_lipschitz: 0.5 },
        ],
        l_bound: 1.0,
        sigma: 2.0,
    })
}

/// `x ↦ m x mod 1` on the circle.
pub fn make_linear_expanding(m: u32) -> Result<MapModel> {
    if m < 2 {
        return Err(Error::Parameter(format!("expansion factor must be at least 2, got {m}")));
    }
    let mf = m as f64;
    Ok(MapModel {
        family: MapFamily::Linear { m },
        space: Space::Circle,
        branches: (0..m)
            .map(|i| Branch { lo: i as f64 / mf, hi: (i + 1) as f64 / mf, bad: false, inverse_lipschitz: 1.0 / mf })
            .collect(),
        l_bound: 1.0,
        sigma: mf,
    })
}

/// `m x mod 1` with a bump on its first branch. The perturbed branch is the
/// single declared bad branch; its inverse Lipschitz bound is the reciprocal
/// of the minimal slope (floored at 1).
pub fn make_perturbed_expanding(m: u32, bump: Bump) -> Result<MapModel> {
    let base = make_linear_expanding(m)?;
    if bump.amplitude == 0.0 {
        return Ok(base);
    }
    if !(bump.width > 0.0 && bump.center - bump.width >= -1e-15 && bump.center + bump.width <= 1.0 + 1e-15) {
        return Err(Error::Construction(format!(
            "bump support [{}, {}] must lie inside the first branch",
            bump.center - bump.width,
            bump.center + bump.width
        )));
    }
    let (lo_factor, _) = bump.slope_factor_range();
    if lo_factor <= 0.0 {
        return Err(Error::Construction(format!(
            "bump amplitude {} makes the first branch non-monotone",
            bump.amplitude
        )));
    }
    let mf = m as f64;
    let min_slope = mf * lo_factor;
    let l_bound = (1.0 / min_slope).max(1.0);
    let mut branches = base.branches;
    branches[0].bad = true;
    branches[0].inverse_lipschitz = 1.0 / min_slope;
    Ok(MapModel { family: MapFamily::Perturbed { m, bump }, space: Space::Circle, branches, l_bound, sigma: mf })
}

impl MapModel {
    /// The same full-branch map read on `[0, 1]` instead of the circle: each
    /// branch maps its closed domain onto `[0, 1]`. Only the linear and
    /// perturbed families have a circle form to convert.
    pub fn on_interval(mut self) -> Self {
        self.space = Space::Interval;
        self
    }

    pub fn family(&self) -> &MapFamily {
        &self.family
    }
    pub fn space(&self) -> Space {
        self.space
    }
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }
    /// Number of branches `d`.
    pub fn degree(&self) -> usize {
        self.branches.len()
    }
    /// Number of declared bad branches `q`.
    pub fn bad_count(&self) -> usize {
        self.branches.iter().filter(|b| b.bad).count()
    }
    /// Bound `L ≥ 1` for the bad inverse branches.
    pub fn l_bound(&self) -> f64 {
        self.l_bound
    }
    /// Expansion `σ > 1` of the good branches.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Index of the branch whose domain contains `x`.
    pub fn branch_of(&self, x: f64) -> usize {
        match self.family {
            MapFamily::Linear { m } | MapFamily::Perturbed { m, .. } => {
                let x = self.space.wrap(x);
                ((x * m as f64).floor() as usize).min(m as usize - 1)
            }
            MapFamily::MannevillePomeau { .. } => usize::from(x > 0.5),
        }
    }

    /// Branch `i` evaluated on its own domain, without reduction mod 1.
    /// The result lies in `[0, 1]`.
    pub fn forward_branch(&self, i: usize, x: f64) -> f64 {
        match self.family {
            MapFamily::Linear { m } => m as f64 * x - i as f64,
            MapFamily::Perturbed { m, bump } => {
                let s = m as f64 * x - i as f64;
                if i == 0 {
                    s + bump.offset(s)
                } else {
                    s
                }
            }
            MapFamily::MannevillePomeau { beta } => {
                if i == 0 {
                    x * (1.0 + (2.0 * x).powf(beta))
                } else {
                    2.0 * x - 1.0
                }
            }
        }
    }

    /// `T(x)`, reduced into the space.
    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::Linear { m } => match self.space {
                Space::Circle => (m as f64 * x).rem_euclid(1.0),
                Space::Interval => m as f64 * x - self.branch_of(x) as f64,
            },
            MapFamily::MannevillePomeau { beta } => {
                if x <= 0.5 {
                    x * (1.0 + (2.0 * x).powf(beta))
                } else {
                    2.0 * x - 1.0
                }
            }
            MapFamily::Perturbed { .. } => {
                let x = self.space.wrap(x);
                self.space.wrap(self.forward_branch(self.branch_of(x), x))
            }
        }
    }

    /// `T'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::Linear { m } => m as f64,
            MapFamily::Perturbed { m, bump } => {
                let x = self.space.wrap(x);
                if self.branch_of(x) == 0 {
                    m as f64 * (1.0 + bump.slope(m as f64 * x))
                } else {
                    m as f64
                }
            }
            MapFamily::MannevillePomeau { beta } => {
                if x <= 0.5 {
                    1.0 + (1.0 + beta) * (2.0 * x).powf(beta)
                } else {
                    2.0
                }
            }
        }
    }

    /// The preimage of `x` in branch `i`.
    pub fn inverse(&self, i: usize, x: f64) -> Result<f64> {
        if i >= self.degree() {
            return Err(Error::Parameter(format!("branch {i} out of range (d = {})", self.degree())));
        }
        match self.family {
            MapFamily::Linear { m } => Ok((self.space.wrap(x) + i as f64) / m as f64),
            MapFamily::Perturbed { m, bump } => {
                let x = self.space.wrap(x);
                let mf = m as f64;
                if i == 0 {
                    let s = solve_increasing(|s| (s + bump.offset(s), 1.0 + bump.slope(s)), x, 0.0, 1.0)?;
                    Ok(s / mf)
                } else {
                    Ok((x + i as f64) / mf)
                }
            }
            MapFamily::MannevillePomeau { beta } => {
                let x = x.clamp(0.0, 1.0);
                if i == 1 {
                    return Ok(0.5 * (x + 1.0));
                }
                if x == 0.0 {
                    return Ok(0.0);
                }
                solve_increasing(
                    |y| {
                        let p = (2.0 * y).powf(beta);
                        (y * (1.0 + p), 1.0 + (1.0 + beta) * p)
                    },
                    x,
                    0.0,
                    0.5,
                )
            }
        }
    }

    /// All `d` preimages of `x`, ordered by branch.
    pub fn preimages(&self, x: f64) -> Result<Preimages> {
        (0..self.degree()).map(|i| self.inverse(i, x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mp_forward_values() {
        let t = make_mp_map(0.5).unwrap();
        assert_relative_eq!(t.forward(0.5), 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.forward(0.75), 0.5, epsilon = 1e-15);
        assert_eq!(t.inverse(0, 0.0).unwrap(), 0.0);
        assert_eq!((t.degree(), t.bad_count(), t.l_bound(), t.sigma()), (2, 1, 1.0, 2.0));
    }

    #[test]
    fn mp_rejects_bad_beta() {
        assert!(make_mp_map(0.0).is_err());
        assert!(make_mp_map(1.0).is_err());
        assert!(make_mp_map(f64::NAN).is_err());
    }

    #[test]
    fn linear_map_basics() {
        let t = make_linear_expanding(2).unwrap();
        assert_relative_eq!(t.forward(0.3), 0.6, epsilon = 1e-15);
        let t3 = make_linear_expanding(3).unwrap();
        let p = t3.preimages(0.0).unwrap();
        assert_eq!(p.len(), 3);
        for (a, b) in p.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!((t.bad_count(), t.sigma()), (0, 2.0));
        assert!(make_linear_expanding(1).is_err());
    }

    #[test]
    fn perturbed_classification() {
        let zero = make_perturbed_expanding(2, Bump::full(0.0)).unwrap();
        assert_eq!(zero, make_linear_expanding(2).unwrap());

        let t = make_perturbed_expanding(2, Bump::for_min_slope(2, 0.8)).unwrap();
        assert_eq!((t.degree(), t.bad_count()), (2, 1));
        assert_relative_eq!(t.l_bound(), 1.25, epsilon = 1e-12);
        assert_eq!(t.sigma(), 2.0);
        // The slope minimum sits at the middle of the branch.
        assert_relative_eq!(t.derivative(0.25), 0.8, epsilon = 1e-12);

        assert!(matches!(make_perturbed_expanding(2, Bump::full(0.6)), Err(Error::Construction(_))));
        assert!(matches!(make_perturbed_expanding(2, Bump::full(-0.95)), Err(Error::Construction(_))));
    }

    #[test]
    fn perturbed_branch_is_onto() {
        let t = make_perturbed_expanding(3, Bump::full(0.2)).unwrap();
        assert_relative_eq!(t.forward_branch(0, 0.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(t.forward_branch(0, 1.0 / 3.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let maps = [
            make_mp_map(0.3).unwrap(),
            make_mp_map(0.9).unwrap(),
            make_linear_expanding(3).unwrap(),
            make_perturbed_expanding(2, Bump::for_min_slope(2, 0.8)).unwrap(),
            make_perturbed_expanding(4, Bump { amplitude: -0.5, center: 0.3, width: 0.2 }).unwrap(),
        ];
        for t in &maps {
            for k in 0..1000 {
                let x = (k as f64 + 0.5) / 1000.0;
                for (i, y) in t.preimages(x).unwrap().into_iter().enumerate() {
                    let back = t.forward_branch(i, y);
                    assert!((back - x).abs() < 1e-10, "{:?} branch {i} x={x} got {back}", t.family());
                }
            }
        }
    }
}
