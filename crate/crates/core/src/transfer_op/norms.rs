use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grid::{Grid, GridFunction};
use crate::map_zoo::Space;

/// Default number of trial functions for operator-norm estimates.
pub const DEFAULT_TRIALS: usize = 256;

/// A fixed family of unit-ish test functions used to probe operator norms.
///
/// The set always starts with the constant 1, followed by a rotation of
/// tents ("smoothed spikes") of varying width, random smooth complex
/// trigonometric sums, and random real polynomials/ramps.
#[derive(Clone, Debug)]
pub struct TrialSet {
    pub functions: Vec<GridFunction>,
    pub norms: Vec<f64>,
    pub alpha: f64,
}

impl TrialSet {
    pub fn new(grid: Grid, fiber: i64, alpha: f64, trials: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = grid.len();
        let mut functions = vec![GridFunction::constant(fiber, grid, Complex64::new(1.0, 0.0))];
        let mut k = 1;
        while functions.len() < trials.max(1) {
            let f = match k % 3 {
                1 => {
                    let width = (2usize << rng.random_range(0..5)).min(len / 2) as f64;
                    let c = rng.random_range(0..len) as f64;
                    GridFunction::from_fn(fiber, grid, |x| {
                        let mut d = (x * grid.n as f64 - c).abs();
                        if grid.space == Space::Circle {
                            d = d.min(grid.n as f64 - d);
                        }
                        Complex64::new((1.0 - d / width).max(0.0), 0.0)
                    })
                }
                2 => {
                    let modes: Vec<(f64, Complex64)> = (1..=6)
                        .map(|m| {
                            let a = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                                / (m * m) as f64;
                            (m as f64, a)
                        })
                        .collect();
                    let c0 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    GridFunction::from_fn(fiber, grid, |x| {
                        modes.iter().fold(c0, |acc, &(m, a)| acc + a * Complex64::from_polar(1.0, 2.0 * PI * m * x))
                    })
                }
                _ => {
                    let (a, b, c) =
                        (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    match grid.space {
                        Space::Interval => GridFunction::from_real(fiber, grid, |x| a + b * x + c * x * x),
                        Space::Circle => {
                            let p = rng.random_range(0.0..1.0);
                            GridFunction::from_real(fiber, grid, |x| {
                                a + b * (2.0 * PI * (x + p)).cos().powi(3) + c * (4.0 * PI * x).sin()
                            })
                        }
                    }
                }
            };
            if f.sup_norm() > 0.0 {
                functions.push(f);
            }
            k += 1;
        }
        let norms = functions.par_iter().map(|f| f.norm(alpha)).collect();
        TrialSet { functions, norms, alpha }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// `max_g ‖op g‖ / ‖g‖` over the trial set, `‖·‖ = sup + v`. A lower
/// estimate of the operator norm on the Hölder space.
pub fn op_norm_estimate<F>(op: F, trials: &TrialSet) -> f64
where
    F: Fn(&GridFunction) -> GridFunction + Sync,
{
    trials
        .functions
        .par_iter()
        .zip(&trials.norms)
        .map(|(g, &n)| op(g).norm(trials.alpha) / n)
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_norm_one() {
        let g = Grid::new(Space::Interval, 512).unwrap();
        let t = TrialSet::new(g, 0, 1.0, 64, 5);
        assert_eq!(t.len(), 64);
        assert!((op_norm_estimate(|f| f.clone(), &t) - 1.0).abs() < 1e-12);
        let three = op_norm_estimate(|f| f.scale(Complex64::new(0.0, 3.0)), &t);
        assert!((three - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trial_sets_are_reproducible() {
        let g = Grid::new(Space::Circle, 256).unwrap();
        let a = TrialSet::new(g, 0, 0.5, 32, 9);
        let b = TrialSet::new(g, 0, 0.5, 32, 9);
        assert_eq!(a.functions, b.functions);
        assert_eq!(a.norms, b.norms);
    }
}
