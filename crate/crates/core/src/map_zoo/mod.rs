//! Concrete map families, sequential systems built from them, and the
//! contraction parameter `s` that gates the cone arguments.
//!
//! Every map is full-branch: each of its `d` branches maps its domain onto
//! the whole space. Branches are classified up front as "bad" (the inverse
//! may expand distances by up to `L ≥ 1`) or good (the inverse contracts by
//! `σ^{-1}`); [`verify_pairing`] checks the declaration by sampling.

mod map;
mod pairing;
mod root;
mod system;

pub use map::{
    make_linear_expanding, make_mp_map, make_perturbed_expanding, Branch, Bump, MapFamily, MapModel, Preimages,
};
pub use pairing::{compute_s, contraction_factor, verify_pairing, PairingReport, SReport, PAIRING_TOL};
pub use root::{solve_increasing, ROOT_TOL};
pub use system::{
    make_driven_mp_system, BetaMap, Component, Driven, Fiber, Observable, Potential, PotentialKind, Scalar, Schedule,
    SequentialSystem, SystemBounds, MEASURE_POINTS,
};

use serde::{Deserialize, Serialize};

/// The phase space of every fiber: `[0, 1]` with `|x − y|`, or the unit
/// circle with arc distance. Both have diameter at most 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Interval,
    Circle,
}

impl Space {
    #[inline]
    pub fn distance(self, x: f64, y: f64) -> f64 {
        match self {
            Space::Interval => (x - y).abs(),
            Space::Circle => {
                let d = (x - y).abs().rem_euclid(1.0);
                d.min(1.0 - d)
            }
        }
    }

    /// Reduce into `[0, 1)` on the circle; identity on the interval.
    #[inline]
    pub fn wrap(self, x: f64) -> f64 {
        match self {
            Space::Interval => x,
            Space::Circle => {
                let r = x.rem_euclid(1.0);
                if r >= 1.0 {
                    0.0
                } else {
                    r
                }
            }
        }
    }
}
