//! One-step weak and strong error orders from the exact Gaussian oracle.
//!
//! For a Gaussian target the reverse transition is an affine Gaussian map
//! with closed-form moments, so single-step errors are computed by
//! deterministic quadrature — no Monte Carlo reference error. The sweep
//! below reproduces the expected orders: strong ≈ 1.5 for the randomized
//! midpoint, weak ≈ 2 for exponential Euler, and the midpoint's weak error
//! sitting strictly below it at every step size.

use ddram::metrics::fit_order;
use ddram::oracle::averaged_local_errors;
use ddram::sampler::{EedConvention, SamplerKind};
use ddram::target::TargetFamily;
use nalgebra::{DMatrix, DVector};

fn main() {
    let family = TargetFamily::Gaussian {
        mean: DVector::zeros(2),
        cov: DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 4.0])),
    };
    let (t_horizon, t_left) = (3.0, 1.5);
    let hs: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();

    for (name, kind) in [
        ("RMD", SamplerKind::Rmd),
        ("EED(exact)", SamplerKind::Eed(EedConvention::Exact)),
        ("EMD", SamplerKind::Emd),
    ] {
        let mut weaks = Vec::new();
        let mut strongs = Vec::new();
        println!("== {name} ==");
        for &h in &hs {
            let (weak, strong) =
                averaged_local_errors(kind, &family, t_horizon, t_left, h, 32, 7).unwrap();
            println!("  h = {h:<10.6} weak = {weak:.3e}  strong = {strong:.3e}");
            weaks.push(weak);
            strongs.push(strong);
        }
        let wfit = fit_order(&hs, &weaks).unwrap();
        let sfit = fit_order(&hs, &strongs).unwrap();
        println!(
            "  fitted orders: weak {:.2} ± {:.2}, strong {:.2} ± {:.2}",
            wfit.slope, wfit.band, sfit.slope, sfit.band
        );
    }
}
