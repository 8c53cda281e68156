//! Ulam discretisation, used only as an independent oracle.
//!
//! The space is cut into `N` equal cells and
//! `M_{ba} = |I_b|^{-1} ∫_{I_a ∩ T^{-1} I_b} e^{φ} |T'| dy`, approximated by
//! splitting every cell at branch boundaries and then into subcells on
//! which `φ` is frozen at the midpoint. `M` acts on cell averages and
//! approximates the transfer operator on densities.

use crate::error::{Error, Result};
use crate::map_zoo::Fiber;

pub struct UlamMatrix {
    n: usize,
    /// `rows[b]` lists `(a, M_{ba})`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl UlamMatrix {
    pub fn build(fiber: &Fiber, cells: usize, subdivision: usize) -> Result<Self> {
        if cells < 2 || subdivision < 1 {
            return Err(Error::Parameter("Ulam matrix needs ≥ 2 cells and ≥ 1 subdivision".into()));
        }
        let map = &fiber.map;
        let h = 1.0 / cells as f64;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cells];
        for a in 0..cells {
            let (lo, hi) = (a as f64 * h, (a + 1) as f64 * h);
            let mut cuts = vec![lo];
            cuts.extend(map.branches().iter().map(|b| b.lo).filter(|&c| c > lo && c < hi));
            cuts.push(hi);
            for piece in cuts.windows(2) {
                let (p, q) = (piece[0], piece[1]);
                let i = map.branch_of(0.5 * (p + q));
                let step = (q - p) / subdivision as f64;
                for s in 0..subdivision {
                    let (u, v) = (p + s as f64 * step, p + (s + 1) as f64 * step);
                    let (tu, tv) = (map.forward_branch(i, u), map.forward_branch(i, v));
                    let (lo_img, hi_img) = (tu.min(tv), tu.max(tv));
                    let weight = fiber.potential.eval(map, 0.5 * (u + v)).exp();
                    let first = ((lo_img / h).floor() as usize).min(cells - 1);
                    let last = ((hi_img / h).ceil() as usize).clamp(first + 1, cells);
                    for b in first..last {
                        let overlap = (hi_img.min((b + 1) as f64 * h) - lo_img.max(b as f64 * h)).max(0.0);
                        if overlap > 0.0 {
                            rows[b].push((a, weight * overlap / h));
                        }
                    }
                }
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(a, _)| a);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(a, w) in row.iter() {
                match merged.last_mut() {
                    Some((la, lw)) if *la == a => *lw += w,
                    _ => merged.push((a, w)),
                }
            }
            *row = merged;
        }
        Ok(UlamMatrix { n: cells, rows })
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(a, w)| w * g[a]).sum()).collect()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, row) in self.rows.iter().enumerate() {
            for &(a, w) in row {
                out[a] += w * v[b];
            }
        }
        out
    }

    /// Dominant eigenvalue and eigenvector (normalised to mean 1) by power iteration.
    pub fn dominant(&self, iterations: usize) -> (f64, Vec<f64>) {
        let mut v = vec![1.0; self.n];
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let w = self.apply(&v);
            let mean = w.iter().sum::<f64>() / self.n as f64;
            lambda = mean / (v.iter().sum::<f64>() / self.n as f64);
            v = w.into_iter().map(|x| x / mean).collect();
        }
        (lambda, v)
    }

    /// Dominant left eigenvector, normalised to sum 1.
    pub fn dominant_left(&self, iterations: usize) -> Vec<f64> {
        let mut v = vec![1.0 / self.n as f64; self.n];
        for _ in 0..iterations {
            let w = self.apply_transpose(&v);
            let s: f64 = w.iter().sum();
            v = w.into_iter().map(|x| x / s).collect();
        }
        v
    }

    /// Modulus of the second eigenvalue relative to the first, estimated by
    /// power iteration on the deflated matrix `M − λ h ℓᵀ / ℓ(h)` started
    /// from `start` (cell averages). Iteration stops early if the deflated
    /// vector collapses to roundoff (Ulam matrices of linear Markov maps are
    /// nilpotent on the complement), keeping the last measured ratio.
    pub fn second_ratio(&self, start: &[f64], iterations: usize) -> f64 {
        let (lambda, h) = self.dominant(iterations.max(200));
        let l = self.dominant_left(iterations.max(200));
        let lh: f64 = l.iter().zip(&h).map(|(a, b)| a * b).sum();
        let deflate = |v: &mut Vec<f64>| {
            let c = l.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / lh;
            v.iter_mut().zip(&h).for_each(|(x, hh)| *x -= c * hh);
        };
        let mut v = start.to_vec();
        deflate(&mut v);
        let mut ratio = 0.0;
        for _ in 0..iterations {
            let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                return 0.0;
            }
            let mut w = self.apply(&v);
            deflate(&mut w);
            let norm1 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm1 <= 1e-13 * lambda * norm0 {
                break;
            }
            ratio = norm1 / norm0 / lambda;
            v = w.into_iter().map(|x| x / norm1).collect();
        }
        ratio
    }
}
