use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{Grid, GridFunction};
use crate::error::{Error, Result};
use crate::map_zoo::SequentialSystem;

/// Default admissible radius for the spectral parameter `z`.
pub const DEFAULT_RADIUS: f64 = 0.25;

/// Above this size the rayon split overhead pays for itself.
const PAR_MIN_LEN: usize = 256;

/// Compositions rescale once the running sup leaves `[1/RESCALE, RESCALE]`.
const RESCALE: f64 = 1e150;

/// One preimage contribution to one target node.
#[derive(Clone, Copy, Debug)]
struct Entry {
    left: u32,
    right: u32,
    theta: f64,
    phi: f64,
}

/// The discretised `L^{(j)}` for one fiber: every target node's preimages,
/// their interpolation stencils, `φ_j(y)` and `u_j(y)`. Weights for a given
/// `z` are formed on demand.
#[derive(Debug)]
pub struct FiberOperator {
    fiber: i64,
    grid: Grid,
    degree: usize,
    dim: usize,
    entries: Vec<Entry>,
    obs: Vec<f64>,
}

impl FiberOperator {
    pub fn build(system: &SequentialSystem, j: i64, grid: Grid) -> Result<Self> {
        let fiber = system.fiber(j);
        let (degree, dim) = (fiber.map.degree(), fiber.observable.dim());
        let rows: Vec<Result<(Vec<Entry>, Vec<f64>)>> = (0..grid.len())
            .into_par_iter()
            .with_min_len(PAR_MIN_LEN)
            .map(|k| {
                let x = grid.node(k);
                let pre = fiber.map.preimages(x)?;
                let mut entries = Vec::with_capacity(degree);
                let mut obs = vec![0.0; degree * dim];
                for (i, &y) in pre.iter().enumerate() {
                    let (l, r, t) = grid.locate(y);
                    entries.push(Entry {
                        left: l as u32,
                        right: r as u32,
                        theta: t,
                        phi: fiber.potential.eval(&fiber.map, y),
                    });
                    fiber.observable.eval_into(&fiber.map, y, &mut obs[i * dim..(i + 1) * dim]);
                }
                Ok((entries, obs))
            })
            .collect();
        let mut entries = Vec::with_capacity(grid.len() * degree);
        let mut obs = Vec::with_capacity(grid.len() * degree * dim);
        for row in rows {
            let (e, o) = row?;
            entries.extend(e);
            obs.extend(o);
        }
        Ok(FiberOperator { fiber: j, grid, degree, dim, entries, obs })
    }

    pub fn fiber(&self) -> i64 {
        self.fiber
    }
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `e^{φ(y) + z·u(y)}` for every (target, preimage) entry.
    pub fn weights(&self, z: &[Complex64]) -> Vec<Complex64> {
        let zero = z.iter().all(|z| *z == Complex64::new(0.0, 0.0));
        self.entries
            .iter()
            .enumerate()
            .map(|(e, entry)| {
                if zero {
                    Complex64::new(entry.phi.exp(), 0.0)
                } else {
                    let u = &self.obs[e * self.dim..(e + 1) * self.dim];
                    let zu: Complex64 = z.iter().zip(u).map(|(z, u)| z * u).sum();
                    (zu + entry.phi).exp()
                }
            })
            .collect()
    }

    /// Observable values `u_a(y)` at every entry, flattened `[entry][a]`.
    pub fn observable_at_preimages(&self) -> &[f64] {
        &self.obs
    }

    #[inline]
    fn row(&self, k: usize, w: &[Complex64], g: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for e in k * self.degree..(k + 1) * self.degree {
            let en = &self.entries[e];
            let gv = g[en.left as usize] * (1.0 - en.theta) + g[en.right as usize] * en.theta;
            acc += w[e] * gv;
        }
        acc
    }

    /// `out = P_w g`, parallel over target nodes.
    pub fn apply_weighted(&self, w: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
        (0..self.grid.len()).into_par_iter().with_min_len(PAR_MIN_LEN).map(|k| self.row(k, w, g)).collect()
    }

    /// Sequential variant, for callers that already parallelise outside.
    pub fn apply_weighted_seq(&self, w: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
        (0..self.grid.len()).map(|k| self.row(k, w, g)).collect()
    }

    /// Transpose (not conjugate transpose) of `P_w`: maps a functional on
    /// fiber `j + 1` to the functional `g ↦ ν(P_w g)` on fiber `j`.
    pub fn adjoint_weighted(&self, w: &[Complex64], nu: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (k, &nk) in nu.iter().enumerate() {
            for e in k * self.degree..(k + 1) * self.degree {
                let en = &self.entries[e];
                let c = w[e] * nk;
                out[en.left as usize] += c * (1.0 - en.theta);
                out[en.right as usize] += c * en.theta;
            }
        }
        out
    }
}

/// `value · e^{log_scale}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaled {
    pub value: GridFunction,
    pub log_scale: f64,
}

impl Scaled {
    /// Multiply the scale back in (may overflow for long compositions).
    pub fn into_plain(self) -> GridFunction {
        let f = self.log_scale.exp();
        self.value.scale(Complex64::new(f, 0.0))
    }
}

/// Transfer operators of a sequential system on a fixed grid, with a cache
/// of per-fiber preimage tables.
pub struct Transfer {
    system: SequentialSystem,
    grid: Grid,
    radius: f64,
    cache: RwLock<HashMap<i64, Arc<FiberOperator>>>,
}

/// Per-fiber tables kept before the cache is flushed (driven systems never repeat).
const CACHE_LIMIT: usize = 1024;

impl Transfer {
    pub fn new(system: SequentialSystem, grid: Grid) -> Result<Self> {
        if system.space() != grid.space {
            return Err(Error::Parameter("grid space does not match the system's space".into()));
        }
        Ok(Transfer { system, grid, radius: DEFAULT_RADIUS, cache: RwLock::new(HashMap::new()) })
    }

    pub fn with_radius(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Parameter(format!("admissible radius must be positive, got {r}")));
        }
        self.radius = r;
        Ok(self)
    }

    pub fn system(&self) -> &SequentialSystem {
        &self.system
    }
    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn alpha(&self) -> f64 {
        self.system.alpha()
    }
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn operator(&self, j: i64) -> Result<Arc<FiberOperator>> {
        let key = self.system.key(j);
        if let Some(op) = self.cache.read().expect("operator cache").get(&key) {
            return Ok(op.clone());
        }
        let op = Arc::new(FiberOperator::build(&self.system, key, self.grid)?);
        let mut cache = self.cache.write().expect("operator cache");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        Ok(cache.entry(key).or_insert(op).clone())
    }

    pub fn check_z(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::Parameter(format!("z has {} components, observable has {}", z.len(), self.dim())));
        }
        let modulus = z.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if modulus > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutsideRadius { modulus, radius: self.radius });
        }
        Ok(())
    }

    /// The operator of fiber `j` together with its weights at `z`.
    pub fn weighted(&self, j: i64, z: &[Complex64]) -> Result<(Arc<FiberOperator>, Vec<Complex64>)> {
        self.check_z(z)?;
        let op = self.operator(j)?;
        let w = op.weights(z);
        Ok((op, w))
    }

    fn check_fiber(&self, j: i64, g: &GridFunction) -> Result<()> {
        if g.grid != self.grid {
            return Err(Error::Parameter("function lives on a different grid".into()));
        }
        if self.system.key(g.fiber) != self.system.key(j) {
            return Err(Error::Parameter(format!("function lives on fiber {}, operator acts on fiber {j}", g.fiber)));
        }
        Ok(())
    }

    /// `L_z^{(j)} g`, a function on fiber `j + 1`.
    pub fn apply(&self, j: i64, z: &[Complex64], g: &GridFunction) -> Result<GridFunction> {
        self.check_fiber(j, g)?;
        let (op, w) = self.weighted(j, z)?;
        Ok(GridFunction { fiber: j + 1, grid: self.grid, values: op.apply_weighted(&w, &g.values) })
    }

    /// `L_z^{j,n} g = L_z^{(j+n−1)} ∘ ⋯ ∘ L_z^{(j)} g` with a log-scale ledger.
    pub fn compose(&self, j: i64, n: usize, z: &[Complex64], g: &GridFunction) -> Result<Scaled> {
        self.check_fiber(j, g)?;
        self.check_z(z)?;
        let mut values = g.values.clone();
        let mut log_scale = 0.0;
        let mut weights: HashMap<i64, (Arc<FiberOperator>, Vec<Complex64>)> = HashMap::new();
        for k in 0..n as i64 {
            let key = self.system.key(j + k);
            if !weights.contains_key(&key) {
                if weights.len() > 64 {
                    weights.clear();
                }
                weights.insert(key, self.weighted(j + k, z)?);
            }
            let (op, w) = &weights[&key];
            values = op.apply_weighted(w, &values);
            let sup = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            if sup > RESCALE || (sup > 0.0 && sup < 1.0 / RESCALE) {
                let inv = 1.0 / sup;
                values.iter_mut().for_each(|v| *v *= inv);
                log_scale += sup.ln();
            }
        }
        Ok(Scaled { value: GridFunction { fiber: j + n as i64, grid: self.grid, values }, log_scale })
    }

    /// `(L_z^{(j)})^* ν`: functional on fiber `j + 1` pulled back to fiber `j`.
    pub fn adjoint(&self, j: i64, z: &[Complex64], nu: &[Complex64]) -> Result<Vec<Complex64>> {
        if nu.len() != self.grid.len() {
            return Err(Error::Parameter("functional has the wrong length".into()));
        }
        let (op, w) = self.weighted(j, z)?;
        Ok(op.adjoint_weighted(&w, nu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_zoo::{make_linear_expanding, make_mp_map, Observable, Potential, PotentialKind, Scalar, Space};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const ZERO: [Complex64; 1] = [Complex64::new(0.0, 0.0)];

    fn doubling(n: usize) -> Transfer {
        let s = SequentialSystem::homogeneous(
            make_linear_expanding(2).unwrap(),
            Potential::zero(),
            Observable::scalar(Scalar::Cos(1)),
        );
        Transfer::new(s, Grid::new(Space::Circle, n).unwrap()).unwrap()
    }

    fn mp(n: usize) -> Transfer {
        let s = SequentialSystem::homogeneous(
            make_mp_map(0.5).unwrap(),
            Potential::new(PotentialKind::Cosine, 0.1),
            Observable::scalar(Scalar::Identity),
        );
        Transfer::new(s, Grid::new(Space::Interval, n).unwrap()).unwrap()
    }

    #[test]
    fn constants_double() {
        let tr = doubling(256);
        let one = GridFunction::constant(0, tr.grid(), Complex64::new(1.0, 0.0));
        let l1 = tr.apply(0, &ZERO, &one).unwrap();
        assert!(l1.values.iter().all(|v| (v - 2.0).norm() < 1e-15));
        let l2 = tr.compose(0, 2, &ZERO, &one).unwrap().into_plain();
        assert!(l2.values.iter().all(|v| (v - 4.0).norm() < 1e-14));
        assert_eq!(tr.compose(0, 0, &ZERO, &one).unwrap().value, one);
    }

    #[test]
    fn fourier_mode_is_annihilated() {
        for m in [2, 3] {
            let s =
                SequentialSystem::homogeneous(make_linear_expanding(m).unwrap(), Potential::zero(), Observable::zero());
            let tr = Transfer::new(s, Grid::new(Space::Circle, 4096).unwrap()).unwrap();
            let e = GridFunction::from_fn(0, tr.grid(), |x| Complex64::from_polar(1.0, 2.0 * PI * x));
            let out = tr.apply(0, &ZERO, &e).unwrap();
            // Brute force: Σ_i e^{2πi(x+i)/m} = 0 exactly; the grid adds O(h²).
            assert!(out.sup_norm() < 1e-5, "m={m}: {}", out.sup_norm());
        }
    }

    #[test]
    fn refuses_large_z() {
        let tr = doubling(64);
        let one = GridFunction::constant(0, tr.grid(), Complex64::new(1.0, 0.0));
        assert!(matches!(tr.apply(0, &[Complex64::new(0.3, 0.0)], &one), Err(Error::OutsideRadius { .. })));
        assert!(tr.apply(0, &[Complex64::new(0.0, 0.25)], &one).is_ok());
    }

    #[test]
    fn adjoint_is_transpose() {
        let tr = mp(128);
        let z = [Complex64::new(0.1, -0.05)];
        let g = GridFunction::from_real(0, tr.grid(), |x| (5.0 * x).cos() + x);
        let nu: Vec<Complex64> = (0..tr.grid().len()).map(|k| Complex64::new((k as f64).sin(), 0.3)).collect();
        let lhs = tr.apply(0, &z, &g).unwrap().pair(&nu);
        let rhs = g.pair(&tr.adjoint(0, &z, &nu).unwrap());
        assert_relative_eq!(lhs.re, rhs.re, epsilon = 1e-10);
        assert_relative_eq!(lhs.im, rhs.im, epsilon = 1e-10);
    }

    #[test]
    fn long_compositions_track_scale() {
        let tr = doubling(64);
        let one = GridFunction::constant(0, tr.grid(), Complex64::new(1.0, 0.0));
        let s = tr.compose(0, 2000, &ZERO, &one).unwrap();
        let total = s.log_scale + s.value.values[0].norm().ln();
        assert_relative_eq!(total, 2000.0 * 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn refinement_converges() {
        let f = |x: f64| (x - 0.3).abs() + x * x;
        let coarse = mp(1024);
        let fine = mp(2048);
        let z = [Complex64::new(0.1, 0.0)];
        let a = coarse.apply(0, &z, &GridFunction::from_real(0, coarse.grid(), f)).unwrap();
        let b = fine.apply(0, &z, &GridFunction::from_real(0, fine.grid(), f)).unwrap();
        let diff = (0..a.len()).map(|k| (a.values[k] - b.values[2 * k]).norm()).fold(0.0, f64::max);
        assert!(diff < 4.0 / 1024.0, "{diff}");
    }
}
