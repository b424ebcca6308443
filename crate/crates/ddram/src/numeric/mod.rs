//! Shared numerical machinery: numerically stable exponential helpers,
//! fixed-order Gauss–Legendre nodes, adaptive Gauss–Kronrod quadrature, and
//! a bracketed root finder.
//!
//! Everything here is deterministic and allocation-light; the quadrature and
//! root finder report structured errors instead of panicking so callers can
//! attach context (which spec, which segment).

pub mod gauss;
pub mod quad;
pub mod root;

/// `1 - e^{-x}` without catastrophic cancellation for small `x`.
///
/// The noise-kernel variances are full of `1 - e^{-c·h}` factors where `h`
/// can be as small as 1e-9 (tail cells of geometric grids); going through
/// `exp` directly would lose most significant digits there.
#[inline]
pub fn em1(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// `log(1 + x)` re-exported under a short local name for symmetry with [`em1`].
#[inline]
pub fn ln1p(x: f64) -> f64 {
    x.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn em1_matches_direct_formula_at_moderate_arguments() {
        for &x in &[0.1, 0.5, 1.0, 3.0] {
            let direct = 1.0 - (-x as f64).exp();
            assert!((em1(x) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn em1_keeps_relative_precision_for_tiny_arguments() {
        // For x -> 0, 1 - e^{-x} = x - x^2/2 + x^3/6 - ...
        let x = 3e-9;
        let series = x - x * x / 2.0 + x * x * x / 6.0;
        assert!(((em1(x) - series) / series).abs() < 1e-14);
    }
}
