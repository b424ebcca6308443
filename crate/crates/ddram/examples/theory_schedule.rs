//! Step-count scaling of the theoretically motivated schedule.
//!
//! The decaying step-size rule h(t) ∝ ε·min{1, T−t}/√((d+M₂²)T) predicts a
//! √d/ε step-count signature up to log factors: halving ε or quadrupling d
//! should roughly double the number of steps. The table below prints the
//! measured ratios; the log factors push the ε-ratio somewhat above 2.

use ddram::schedule::theory_schedule;

fn main() {
    let c_h = 0.05;
    println!("{:>6} {:>5} {:>8} {:>10} {:>10}", "eps", "d", "steps", "T", "delta");
    let mut counts = std::collections::BTreeMap::new();
    for &eps in &[0.1, 0.05, 0.025] {
        for &d in &[4usize, 16, 64] {
            let m2 = (d as f64).sqrt(); // standard-Gaussian-scale second moment
            let s = theory_schedule(eps, 1.0, d, m2, c_h).unwrap();
            println!(
                "{eps:>6} {d:>5} {:>8} {:>10.3} {:>10.2e}",
                s.n_steps(),
                s.horizon,
                s.end_gap
            );
            counts.insert((format!("{eps}"), d), s.n_steps());
        }
    }
    for &d in &[4usize, 16, 64] {
        let r = counts[&("0.05".to_string(), d)] as f64 / counts[&("0.1".to_string(), d)] as f64;
        println!("d = {d:<3} N(eps/2)/N(eps) = {r:.2}");
    }
    for &eps in &["0.1", "0.05"] {
        let r = counts[&(eps.to_string(), 16)] as f64 / counts[&(eps.to_string(), 4)] as f64;
        println!("eps = {eps:<5} N(4d)/N(d) = {r:.2}");
    }
}
