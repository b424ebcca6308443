//! Cross-check the analytic one-step oracle against its Monte Carlo twin.
//!
//! The Monte Carlo oracle couples each coarse step to a densely resolved
//! exact reference through common random numbers, so its standard errors
//! are orders of magnitude tighter than independent sampling would give.
//! On a Gaussian target both oracles must agree within a few standard
//! errors; on non-Gaussian targets only the Monte Carlo oracle applies.

use ddram::oracle::{local_errors, local_errors_mc};
use ddram::rngstream::stream;
use ddram::sampler::SamplerKind;
use ddram::target::TargetFamily;
use nalgebra::{DMatrix, DVector};

fn main() {
    let family = TargetFamily::Gaussian {
        mean: DVector::from_vec(vec![0.8, 0.0]),
        cov: DMatrix::from_diagonal(&DVector::from_vec(vec![2.5, 0.25])),
    };
    let (t_horizon, t_left, h) = (2.0, 0.7, 0.1);
    let mut rng = stream(42, 0, "example-start");
    let x = family.forward_sample(t_horizon - t_left, &mut rng).unwrap();

    println!("Gaussian target, h = {h}:");
    let (weak, strong) =
        local_errors(SamplerKind::Rmd, &family, t_horizon, &x, t_left, h).unwrap();
    let mc = local_errors_mc(SamplerKind::Rmd, &family, t_horizon, &x, t_left, h, 20_000, 42)
        .unwrap();
    println!("  analytic     weak = {weak:.5e}  strong = {strong:.5e}");
    println!(
        "  monte carlo  weak = {:.5e} ± {:.1e}  strong = {:.5e} ± {:.1e}",
        mc.weak, mc.weak_se, mc.strong, mc.strong_se
    );
    assert!((mc.weak - weak).abs() < 4.0 * mc.weak_se.max(1e-12));
    assert!((mc.strong - strong).abs() < 4.0 * mc.strong_se.max(1e-12));

    // Non-Gaussian target: Monte Carlo only.
    let two_point = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
    let mut rng = stream(42, 1, "example-start");
    let x = two_point.forward_sample(t_horizon - t_left, &mut rng).unwrap();
    println!("two-point target, h = {h}:");
    let mc = local_errors_mc(SamplerKind::Rmd, &two_point, t_horizon, &x, t_left, h, 20_000, 42)
        .unwrap();
    println!(
        "  monte carlo  weak = {:.5e} ± {:.1e}  strong = {:.5e} ± {:.1e}",
        mc.weak, mc.weak_se, mc.strong, mc.strong_se
    );
}
