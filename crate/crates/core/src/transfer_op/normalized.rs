use std::sync::Arc;

use num_complex::Complex64;

use super::grid::GridFunction;
use super::operator::{FiberOperator, Transfer};
use crate::error::{Error, Result};
use crate::rpf::GibbsFamily;

/// Smallest admissible value of `h_j` before division is refused.
const POSITIVITY_FLOOR: f64 = 1e-12;

/// `L̃_{it}^{(j)} g = L_{it}^{(j)}(g h_j) / (λ_j h_{j+1})`, normalised with the
/// `z = 0` triplets so that `L̃_0 1 = 1`.
///
/// In centred mode the observable is replaced by `u_j − μ_j(u_j)`, which
/// only multiplies each step by the phase `e^{−i t·μ_j(u_j)}`.
pub struct Normalized<'a> {
    tr: &'a Transfer,
    gibbs: &'a GibbsFamily,
    centred: bool,
}

/// One precomputed normalised step.
pub struct Step {
    op: Arc<FiberOperator>,
    w: Vec<Complex64>,
    h: Vec<Complex64>,
    inv: Vec<Complex64>,
    fiber: i64,
}

impl Step {
    pub fn apply(&self, g: &[Complex64]) -> Vec<Complex64> {
        let gh: Vec<Complex64> = g.iter().zip(&self.h).map(|(a, b)| a * b).collect();
        let mut out = self.op.apply_weighted(&self.w, &gh);
        out.iter_mut().zip(&self.inv).for_each(|(o, i)| *o *= i);
        out
    }

    /// Same as [`Step::apply`] without inner parallelism.
    pub fn apply_seq(&self, g: &[Complex64]) -> Vec<Complex64> {
        let gh: Vec<Complex64> = g.iter().zip(&self.h).map(|(a, b)| a * b).collect();
        let mut out = self.op.apply_weighted_seq(&self.w, &gh);
        out.iter_mut().zip(&self.inv).for_each(|(o, i)| *o *= i);
        out
    }

    pub fn fiber(&self) -> i64 {
        self.fiber
    }
}

impl<'a> Normalized<'a> {
    pub fn new(tr: &'a Transfer, gibbs: &'a GibbsFamily) -> Result<Self> {
        if !gibbs.rpf.z.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::Parameter("normalisation needs the z = 0 triplets".into()));
        }
        for t in &gibbs.rpf.triplets {
            let m = t.h.min_re();
            if !(m > POSITIVITY_FLOOR) {
                return Err(Error::PositivityLost { fiber: t.fiber, min: m });
            }
        }
        Ok(Normalized { tr, gibbs, centred: false })
    }

    pub fn centred(mut self) -> Self {
        self.centred = true;
        self
    }

    pub fn transfer(&self) -> &Transfer {
        self.tr
    }

    pub fn gibbs(&self) -> &GibbsFamily {
        self.gibbs
    }

    /// `μ_j(u_j)`, componentwise.
    pub fn mean_observable(&self, j: i64) -> Result<Vec<f64>> {
        let fiber = self.tr.system().fiber(j);
        let grid = self.tr.grid();
        let mu = self.gibbs.mu(j)?;
        let d = fiber.observable.dim();
        let mut out = vec![0.0; d];
        let mut u = vec![0.0; d];
        for (k, &m) in mu.iter().enumerate() {
            fiber.observable.eval_into(&fiber.map, grid.node(k), &mut u);
            out.iter_mut().zip(&u).for_each(|(o, v)| *o += m * v);
        }
        Ok(out)
    }

    /// `ν_{j+1}(L(u_j h_j)) / λ_j`, with `u_j` taken at the exact preimages.
    ///
    /// Equal to [`Normalized::mean_observable`] up to quadrature error, and
    /// exactly the `z`-derivative of the discrete `log λ_j` for a
    /// homogeneous system, which makes it the centring that keeps the
    /// pressure gradient at zero.
    pub fn transported_mean(&self, j: i64) -> Result<Vec<f64>> {
        let zero = vec![Complex64::new(0.0, 0.0); self.tr.dim()];
        let (op, w) = self.tr.weighted(j, &zero)?;
        let d = self.tr.dim();
        let obs = op.observable_at_preimages();
        let h = &self.gibbs.h(j)?.values;
        let nu = &self.gibbs.rpf.get(j + 1)?.nu;
        let lam = self.gibbs.lambda(j)?;
        (0..d)
            .map(|a| {
                let wa: Vec<Complex64> = w.iter().enumerate().map(|(e, w)| w * obs[e * d + a]).collect();
                let lh = op.apply_weighted(&wa, h);
                Ok(lh.iter().zip(nu).map(|(x, n)| (x * n).re).sum::<f64>() / lam)
            })
            .collect()
    }

    pub fn step(&self, j: i64, t: &[f64]) -> Result<Step> {
        let z: Vec<Complex64> = t.iter().map(|&t| Complex64::new(0.0, t)).collect();
        let (op, w) = self.tr.weighted(j, &z)?;
        let lam = self.gibbs.lambda(j)?;
        let phase = if self.centred {
            let m = self.mean_observable(j)?;
            Complex64::from_polar(1.0, -t.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>())
        } else {
            Complex64::new(1.0, 0.0)
        };
        let h = self.gibbs.h(j)?.values.clone();
        let inv = self.gibbs.h(j + 1)?.values.iter().map(|hn| phase / (lam * hn)).collect();
        Ok(Step { op, w, h, inv, fiber: j })
    }

    pub fn apply(&self, j: i64, t: &[f64], g: &GridFunction) -> Result<GridFunction> {
        let s = self.step(j, t)?;
        Ok(GridFunction { fiber: j + 1, grid: g.grid, values: s.apply(&g.values) })
    }

    /// `L̃_{it}^{j,n} g`.
    pub fn compose(&self, j: i64, n: usize, t: &[f64], g: &GridFunction) -> Result<GridFunction> {
        let mut cur = g.clone();
        for k in 0..n as i64 {
            cur = self.apply(j + k, t, &cur)?;
        }
        Ok(cur)
    }
}
