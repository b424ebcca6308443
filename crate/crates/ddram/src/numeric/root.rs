//! Bracketed scalar root finding (Brent's method).
//!
//! Used to invert the midpoint-density normalizer Ω on a segment; monotone
//! brackets come for free there, so a bracketed method is the robust choice.

/// Root finding failure modes.
#[derive(Debug, thiserror::Error)]
pub enum RootError {
    #[error("no sign change on bracket [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root finder did not converge within {0} iterations")]
    NoConvergence(usize),
}

/// Find `x` in `[a, b]` with `f(x) = 0` to absolute tolerance `tol`.
///
/// Standard Brent: bisection safeguarded inverse quadratic / secant steps.
pub fn brent(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, RootError> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoBracket { a, b, fa, fb });
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;

    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // Inverse quadratic interpolation.
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            // Secant.
            b - fb * (b - a) / (fb - fa)
        };

        let lo = (3.0 * a + b) / 4.0;
        let cond_outside = !((lo.min(b) < s) && (s < lo.max(b)));
        let cond_slow = if mflag {
            (s - b).abs() >= (b - c).abs() / 2.0 || (b - c).abs() < tol
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0 || (c - d).abs() < tol
        };
        if cond_outside || cond_slow {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }

        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(RootError::NoConvergence(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_root() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-12, 60).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-11);
    }

    #[test]
    fn finds_root_of_exponential_equation() {
        // e^x - 3 = 0 -> x = ln 3
        let r = brent(|x| x.exp() - 3.0, 0.0, 2.0, 1e-13, 60).unwrap();
        assert!((r - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        assert!(matches!(
            brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 60),
            Err(RootError::NoBracket { .. })
        ));
    }

    #[test]
    fn converges_within_60_iterations_on_flat_function() {
        // Very flat near the root; still must converge in the budget.
        let r = brent(|x: f64| (x - 0.5).powi(7), 0.0, 1.0, 1e-12, 60).unwrap();
        assert!((r - 0.5).abs() < 1e-2);
    }
}
