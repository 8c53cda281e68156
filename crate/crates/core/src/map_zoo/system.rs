use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::map::{make_mp_map, MapModel};
use super::Space;
use crate::error::{Error, Result};

/// Resolution used when a potential's oscillation or norm is measured.
pub const MEASURE_POINTS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    /// `cos 2πx`
    Cosine,
    /// `−log T'(x)`
    Geometric,
}

/// `φ(x) = shift + scale · base(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub scale: f64,
    pub shift: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Potential { kind: PotentialKind::Zero, scale: 0.0, shift: 0.0 }
    }

    pub fn new(kind: PotentialKind, scale: f64) -> Self {
        Potential { kind, scale, shift: 0.0 }
    }

    pub fn shifted(mut self, c: f64) -> Self {
        self.shift += c;
        self
    }

    #[inline]
    pub fn eval(&self, map: &MapModel, x: f64) -> f64 {
        let base = match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Cosine => (2.0 * PI * x).cos(),
            PotentialKind::Geometric => -map.derivative(x).ln(),
        };
        self.shift + self.scale * base
    }
}

/// Closed-form scalar functions used for observables and coboundary transfer functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scalar {
    Zero,
    Constant(f64),
    /// `cos 2πkx`
    Cos(u32),
    /// `sin 2πkx`
    Sin(u32),
    Identity,
}

impl Scalar {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Scalar::Zero => 0.0,
            Scalar::Constant(c) => c,
            Scalar::Cos(k) => (2.0 * PI * k as f64 * x).cos(),
            Scalar::Sin(k) => (2.0 * PI * k as f64 * x).sin(),
            Scalar::Identity => x,
        }
    }
}

/// One coordinate of an observable: either `r` itself or the coboundary `r∘T − r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub base: Scalar,
    pub coboundary: bool,
}

/// An `ℝ^d`-valued observable `u_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub components: Vec<Component>,
}

impl Observable {
    pub fn scalar(base: Scalar) -> Self {
        Observable { components: vec![Component { base, coboundary: false }] }
    }

    pub fn coboundary(r: Scalar) -> Self {
        Observable { components: vec![Component { base: r, coboundary: true }] }
    }

    pub fn vector(bases: &[Scalar]) -> Self {
        Observable { components: bases.iter().map(|&base| Component { base, coboundary: false }).collect() }
    }

    pub fn zero() -> Self {
        Observable::scalar(Scalar::Zero)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline(always)]
    pub fn eval_component(&self, a: usize, map: &MapModel, x: f64) -> f64 {
        let c = &self.components[a];
        if c.coboundary {
            c.base.eval(map.forward(x)) - c.base.eval(x)
        } else {
            c.base.eval(x)
        }
    }

    #[inline(always)]
    pub fn eval_into(&self, map: &MapModel, x: f64, out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(a, map, x);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| matches!(c.base, Scalar::Zero) || (c.coboundary && matches!(c.base, Scalar::Constant(_))))
    }
}

/// Everything attached to a single index `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub map: Arc<MapModel>,
    pub potential: Potential,
    pub observable: Observable,
}

/// `ω ↦ offset + slope·ω` on the circle `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaMap {
    pub offset: f64,
    pub slope: f64,
}

impl BetaMap {
    pub fn constant(beta: f64) -> Self {
        BetaMap { offset: beta, slope: 0.0 }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        self.offset + self.slope * omega
    }

    /// Closure of the image of `[0, 1)`.
    pub fn range(&self) -> (f64, f64) {
        let a = self.offset;
        let b = self.offset + self.slope;
        (a.min(b), a.max(b))
    }
}

/// Manneville-Pomeau maps driven by an irrational rotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Driven {
    pub angle: f64,
    pub omega0: f64,
    pub beta: BetaMap,
    pub potential: Potential,
    pub observable: Observable,
    /// Repeat the first `horizon` fibers instead of following the rotation.
    pub periodic_extension: bool,
}

impl Driven {
    pub fn omega(&self, j: i64) -> f64 {
        (self.omega0 + j as f64 * self.angle).rem_euclid(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// `fibers[j mod p]`
    Periodic(Vec<Fiber>),
    Driven(Driven),
}

/// An indexed family `j ↦ (T_j, φ_j, u_j)` defined for every `j ∈ ℤ`.
///
/// Only `horizon` indices are materialised for sup-type checks; outside of
/// them periodic schedules repeat and driven schedules follow the rotation
/// (or repeat, if `periodic_extension` is set).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialSystem {
    schedule: Schedule,
    alpha: f64,
    horizon: usize,
    epsilon_override: Option<f64>,
}

/// Measured bounds of a system over its materialised window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemBounds {
    pub sup_potential: f64,
    pub sup_transfer_mass: f64,
    pub max_oscillation: f64,
    pub sup_observable: f64,
}

/// `β_j = β(θ^j ω₀)` with `θ` the rotation by `angle`.
pub fn make_driven_mp_system(angle: f64, beta: BetaMap, horizon: usize) -> Result<SequentialSystem> {
    let (lo, hi) = beta.range();
    if !(lo > 0.0 && hi < 1.0) {
        return Err(Error::Parameter(format!("β range [{lo}, {hi}] must lie strictly inside (0,1)")));
    }
    if !angle.is_finite() {
        return Err(Error::Parameter("rotation angle must be finite".into()));
    }
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    Ok(SequentialSystem {
        schedule: Schedule::Driven(Driven {
            angle,
            omega0: 0.0,
            beta,
            potential: Potential::zero(),
            observable: Observable::zero(),
            periodic_extension: false,
        }),
        alpha: 1.0,
        horizon,
        epsilon_override: None,
    })
}

impl SequentialSystem {
    /// The constant sequence `T_j = map`.
    pub fn homogeneous(map: MapModel, potential: Potential, observable: Observable) -> Self {
        SequentialSystem::periodic(vec![Fiber { map: Arc::new(map), potential, observable }]).expect("one fiber")
    }

    /// The sequence repeating `fibers` with period `fibers.len()`.
    pub fn periodic(fibers: Vec<Fiber>) -> Result<Self> {
        if fibers.is_empty() {
            return Err(Error::Parameter("a periodic system needs at least one fiber".into()));
        }
        let space = fibers[0].map.space();
        let dim = fibers[0].observable.dim();
        if fibers.iter().any(|f| f.map.space() != space || f.observable.dim() != dim) {
            return Err(Error::Parameter("all fibers must share the space and observable dimension".into()));
        }
        let horizon = fibers.len();
        Ok(SequentialSystem { schedule: Schedule::Periodic(fibers), alpha: 1.0, horizon, epsilon_override: None })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!("Hölder exponent must lie in (0,1], got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        match &mut self.schedule {
            Schedule::Periodic(fibers) => fibers.iter_mut().for_each(|f| f.potential = potential),
            Schedule::Driven(d) => d.potential = potential,
        }
        self
    }

    pub fn with_observable(mut self, observable: Observable) -> Self {
        match &mut self.schedule {
            Schedule::Periodic(fibers) => fibers.iter_mut().for_each(|f| f.observable = observable.clone()),
            Schedule::Driven(d) => d.observable = observable,
        }
        self
    }

    pub fn with_omega0(mut self, omega0: f64) -> Self {
        if let Schedule::Driven(d) = &mut self.schedule {
            d.omega0 = omega0.rem_euclid(1.0);
        }
        self
    }

    pub fn with_periodic_extension(mut self, on: bool) -> Self {
        if let Schedule::Driven(d) = &mut self.schedule {
            d.periodic_extension = on;
        }
        self
    }

    /// Declare oscillation bounds `ε_j = eps`. The declaration must dominate
    /// the measured oscillation on every materialised fiber.
    pub fn with_epsilon(mut self, eps: f64) -> Result<Self> {
        let measured = self.bounds().max_oscillation;
        if !(eps >= measured - 1e-12) {
            return Err(Error::Precondition(format!(
                "declared oscillation bound {eps} is below the measured oscillation {measured}"
            )));
        }
        self.epsilon_override = Some(eps);
        Ok(self)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Period of the index dependence, if any.
    pub fn period(&self) -> Option<usize> {
        match &self.schedule {
            Schedule::Periodic(f) => Some(f.len()),
            Schedule::Driven(d) if d.periodic_extension => Some(self.horizon),
            Schedule::Driven(_) => None,
        }
    }

    /// Canonical representative of `j`: equal keys mean identical fibers.
    pub fn key(&self, j: i64) -> i64 {
        match self.period() {
            Some(p) => j.rem_euclid(p as i64),
            None => j,
        }
    }

    pub fn fiber(&self, j: i64) -> Fiber {
        match &self.schedule {
            Schedule::Periodic(f) => f[j.rem_euclid(f.len() as i64) as usize].clone(),
            Schedule::Driven(d) => {
                let beta = self.driven_beta(d, j);
                Fiber {
                    map: Arc::new(make_mp_map(beta).expect("β range validated at construction")),
                    potential: d.potential,
                    observable: d.observable.clone(),
                }
            }
        }
    }

    fn driven_beta(&self, d: &Driven, j: i64) -> f64 {
        let j = if d.periodic_extension { j.rem_euclid(self.horizon as i64) } else { j };
        d.beta.eval(d.omega(j))
    }

    /// `β_j` of a driven system.
    pub fn beta(&self, j: i64) -> Option<f64> {
        match &self.schedule {
            Schedule::Driven(d) => Some(self.driven_beta(d, j)),
            Schedule::Periodic(_) => None,
        }
    }

    pub fn space(&self) -> Space {
        match &self.schedule {
            Schedule::Periodic(f) => f[0].map.space(),
            Schedule::Driven(_) => Space::Interval,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.schedule {
            Schedule::Periodic(f) => f[0].observable.dim(),
            Schedule::Driven(d) => d.observable.dim(),
        }
    }

    /// Indices over which sup-type quantities are taken.
    pub fn window(&self) -> std::ops::Range<i64> {
        0..self.period().unwrap_or(self.horizon) as i64
    }

    /// `sup φ_j − inf φ_j` measured on a fine sample.
    pub fn measured_oscillation(&self, j: i64) -> f64 {
        let f = self.fiber(j);
        let (lo, hi) = sample_points(self.space()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            let v = f.potential.eval(&f.map, x);
            (lo.min(v), hi.max(v))
        });
        hi - lo
    }

    /// The oscillation bound `ε_j` used by the contraction factor.
    pub fn epsilon(&self, j: i64) -> f64 {
        let m = self.measured_oscillation(j);
        self.epsilon_override.map_or(m, |e| e.max(m))
    }

    /// Grid-measured bounds: `sup ‖φ_j‖_∞`, `sup_x Σ_{Ty=x} e^{φ_j(y)}`,
    /// `max ε_j`, `sup ‖u_j‖_∞`.
    pub fn bounds(&self) -> SystemBounds {
        let mut b =
            SystemBounds { sup_potential: 0.0, sup_transfer_mass: 0.0, max_oscillation: 0.0, sup_observable: 0.0 };
        let mut u = vec![0.0; self.dim()];
        for j in self.window() {
            let f = self.fiber(j);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for x in sample_points(self.space()) {
                let v = f.potential.eval(&f.map, x);
                lo = lo.min(v);
                hi = hi.max(v);
                b.sup_potential = b.sup_potential.max(v.abs());
                f.observable.eval_into(&f.map, x, &mut u);
                b.sup_observable = u.iter().fold(b.sup_observable, |m, v| m.max(v.abs()));
                if let Ok(pre) = f.map.preimages(x) {
                    let mass: f64 = pre.iter().map(|&y| f.potential.eval(&f.map, y).exp()).sum();
                    b.sup_transfer_mass = b.sup_transfer_mass.max(mass);
                }
            }
            b.max_oscillation = b.max_oscillation.max(hi - lo);
        }
        b
    }
}

fn sample_points(space: Space) -> impl Iterator<Item = f64> {
    let n = match space {
        Space::Interval => MEASURE_POINTS + 1,
        Space::Circle => MEASURE_POINTS,
    };
    (0..n).map(|k| k as f64 / MEASURE_POINTS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_zoo::make_linear_expanding;

    #[test]
    fn constant_drive_matches_homogeneous() {
        let driven = make_driven_mp_system(0.618, BetaMap::constant(0.4), 50).unwrap();
        let hom = SequentialSystem::homogeneous(make_mp_map(0.4).unwrap(), Potential::zero(), Observable::zero());
        for j in -10..60 {
            let (a, b) = (driven.fiber(j), hom.fiber(j));
            assert_eq!(a, b, "fiber {j}");
        }
    }

    #[test]
    fn driven_rejects_degenerate_betas() {
        assert!(make_driven_mp_system(0.3, BetaMap { offset: 0.0, slope: 0.5 }, 10).is_err());
        assert!(make_driven_mp_system(0.3, BetaMap { offset: 0.5, slope: 0.5 }, 10).is_err());
        assert!(make_driven_mp_system(0.3, BetaMap::constant(0.5), 0).is_err());
    }

    #[test]
    fn horizon_one_is_a_single_map() {
        let s =
            make_driven_mp_system(0.618, BetaMap { offset: 0.3, slope: 0.2 }, 1).unwrap().with_periodic_extension(true);
        assert_eq!(s.period(), Some(1));
        assert_eq!(s.window(), 0..1);
        assert_eq!(s.fiber(0), s.fiber(7));
    }

    #[test]
    fn golden_rotation_equidistributes_beta() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let s = make_driven_mp_system(golden, BetaMap { offset: 0.3, slope: 0.2 }, 10_000).unwrap();
        let mut bins = [0usize; 10];
        for j in 0..10_000 {
            let b = s.beta(j).unwrap();
            assert!((0.3..0.5).contains(&b));
            bins[(((b - 0.3) / 0.02) as usize).min(9)] += 1;
        }
        for c in bins {
            assert!((c as f64 - 1000.0).abs() <= 50.0, "{bins:?}");
        }
    }

    #[test]
    fn epsilon_override_must_dominate() {
        let s = SequentialSystem::homogeneous(
            make_linear_expanding(2).unwrap(),
            Potential::new(PotentialKind::Cosine, 0.1),
            Observable::zero(),
        );
        assert!((s.measured_oscillation(0) - 0.2).abs() < 1e-12);
        assert!(s.clone().with_epsilon(0.1).is_err());
        assert_eq!(s.with_epsilon(0.3).unwrap().epsilon(0), 0.3);
    }

    #[test]
    fn bounds_of_doubling() {
        let s = SequentialSystem::homogeneous(
            make_linear_expanding(2).unwrap(),
            Potential::zero(),
            Observable::scalar(Scalar::Cos(1)),
        );
        let b = s.bounds();
        assert_eq!(b.sup_potential, 0.0);
        assert_eq!(b.sup_transfer_mass, 2.0);
        assert_eq!(b.sup_observable, 1.0);
    }

    #[test]
    fn coboundary_component() {
        let t = make_linear_expanding(2).unwrap();
        let u = Observable::coboundary(Scalar::Cos(1));
        let x: f64 = 0.1;
        let expect = (4.0 * PI * x).cos() - (2.0 * PI * x).cos();
        assert!((u.eval_component(0, &t, x) - expect).abs() < 1e-14);
    }
}
