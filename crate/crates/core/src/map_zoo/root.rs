//! Safeguarded Newton iteration for increasing scalar functions.

use crate::error::{Error, Result};

/// Absolute residual accepted by [`solve_increasing`].
pub const ROOT_TOL: f64 = 1e-13;

/// Solve `f(y) = target` for `y ∈ [lo, hi]` where `f` is continuous and
/// strictly increasing. `f` returns `(value, derivative)`.
///
/// Newton steps are taken while they stay inside the current bracket,
/// otherwise the bracket is bisected. The iteration runs until the step is
/// at rounding level relative to `y` (so tiny roots near a neutral fixed
/// point keep full relative precision) and the result is rejected if the
/// final residual exceeds [`ROOT_TOL`].
pub fn solve_increasing<F>(f: F, target: f64, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if target <= flo {
        if flo - target <= ROOT_TOL {
            return Ok(lo);
        }
        return Err(Error::RootSolve { x: target, detail: format!("below branch range [{flo}, {fhi}]") });
    }
    if target >= fhi {
        if target - fhi <= ROOT_TOL {
            return Ok(hi);
        }
        return Err(Error::RootSolve { x: target, detail: format!("above branch range [{flo}, {fhi}]") });
    }

    // Start from the secant guess; it is exact for affine branches.
    let mut y = lo + (target - flo) / (fhi - flo) * (hi - lo);
    for _ in 0..200 {
        let (v, dv) = f(y);
        let r = v - target;
        if r == 0.0 {
            return Ok(y);
        }
        if r < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let mut next = if dv > 0.0 { y - r / dv } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - y).abs();
        y = next;
        if step <= 4.0 * f64::EPSILON * y.abs() || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let (v, _) = f(y);
    if (v - target).abs() > ROOT_TOL {
        return Err(Error::RootSolve { x: target, detail: format!("residual {:.3e}", v - target) });
    }
    Ok(y)
}
