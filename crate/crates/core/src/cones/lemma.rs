use num_complex::Complex64;

/// The four-number comparison: for complex `A, A'`, real `B > B'` with
/// `|A − B| ≤ ε₁B`, `|A' − B'| ≤ ε₁B` and `|B'/B| ≤ ζ < 1`,
/// `|(A − A')/(B − B') − 1| ≤ 2ε₁/(1 − ζ)`.
///
/// Returns `(lhs, bound)` when the hypotheses hold, `None` otherwise.
pub fn four_number_bound(a: Complex64, a2: Complex64, b: f64, b2: f64, eps1: f64, zeta: f64) -> Option<(f64, f64)> {
    let hypotheses = b > b2
        && eps1 > 0.0
        && zeta > 0.0
        && zeta < 1.0
        && (a - b).norm() <= eps1 * b
        && (a2 - b2).norm() <= eps1 * b
        && (b2 / b).abs() <= zeta;
    hypotheses.then(|| (((a - a2) / (b - b2) - 1.0).norm(), 2.0 * eps1 / (1.0 - zeta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_violated_hypotheses() {
        let c = |x: f64| Complex64::new(x, 0.0);
        assert!(four_number_bound(c(1.0), c(0.0), 1.0, 1.0, 0.1, 0.5).is_none());
        assert!(four_number_bound(c(2.0), c(0.0), 1.0, 0.0, 0.1, 0.5).is_none());
        assert!(four_number_bound(c(1.0), c(0.0), 1.0, 0.9, 0.1, 0.5).is_none());
    }

    #[test]
    fn exact_inputs_give_zero() {
        let (lhs, bound) =
            four_number_bound(Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0), 2.0, 0.5, 0.01, 0.5).unwrap();
        assert_eq!(lhs, 0.0);
        assert!((bound - 0.04).abs() < 1e-15);
    }
}
