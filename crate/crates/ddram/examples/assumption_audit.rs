//! Audit the runtime assumptions for a deliberately perturbed score field.
//!
//! A smooth perturbation of prescribed L²(π_t) size ε is added to the exact
//! score; the audit then measures the realized L² error, the secant
//! Lipschitz constants of the absolute and relative scores, and reports the
//! 1/(1−e^{−2t}) reference profile the Lipschitz assumption is stated
//! against.

use ddram::metrics::assumption_audit;
use ddram::target::{ScoreField, TargetFamily};

fn main() {
    let family = TargetFamily::standard(4);
    let score = ScoreField::perturbed(family.clone(), 0.1);
    let t_grid = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0];
    let report = assumption_audit(&score, &family, &t_grid, 100_000, 11).unwrap();

    println!("M2 bound: {:.4}", report.m2);
    println!(
        "{:>6} {:>12} {:>10} {:>10} {:>10}",
        "t", "L2 error", "lip(abs)", "lip(rel)", "profile"
    );
    for row in &report.rows {
        println!(
            "{:>6} {:>12.5} {:>10.3} {:>10.3} {:>10.3}",
            row.t,
            row.l2_score_error,
            row.absolute_lipschitz,
            row.relative_lipschitz,
            row.lipschitz_profile
        );
        // The perturbation realizes its nominal L² size at every time.
        assert!((row.l2_score_error - 0.1).abs() < 0.01);
    }
}
