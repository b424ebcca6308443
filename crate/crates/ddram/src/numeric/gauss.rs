//! Gauss–Legendre nodes and weights on [-1, 1].
//!
//! Computed at first use by Newton iteration on the Legendre polynomial
//! recurrence and cached. The 64-point rule is the workhorse for integrating
//! smooth functions of the midpoint time τ against its density.

use std::sync::OnceLock;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Build the rule by Newton iteration from the Chebyshev initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Initial guess: Chebyshev node, accurate to ~1e-3.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over [a, b] with this rule.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The shared 64-point rule.
pub fn gl64() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl64_integrates_polynomials_exactly() {
        // 64-point Gauss is exact through degree 127.
        let rule = gl64();
        let val = rule.integrate(-1.0, 1.0, |x| x.powi(10));
        assert!((val - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn gl64_integrates_exponential_to_machine_precision() {
        let rule = gl64();
        let val = rule.integrate(0.0, 1.0, f64::exp);
        assert!((val - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let rule = GaussLegendre::new(32);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let rule = gl64();
        for w in rule.nodes.windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..32 {
            assert!((rule.nodes[i] + rule.nodes[63 - i]).abs() < 1e-14);
        }
    }
}
