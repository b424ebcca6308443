//! Time grids for the samplers.
//!
//! Four generators: a uniform grid, a proportional (geometrically shrinking
//! gap) grid whose refinements nest, the theory-driven decaying schedule
//! h(t) ∝ ε·min{1, T−t}/√((d+M₂²)T) with its prescribed horizon and
//! early-stopping gap, and a power-law σ-grid for EDM-style runs (where the
//! "times" are decreasing noise levels).

use serde::{Deserialize, Serialize};

use crate::numeric::em1;

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("invalid schedule parameters: {0}")]
    Invalid(String),
    #[error("step size underflow (h = {h:.3e} at t = {t:.6}): ε/β̃₀ too small for this horizon")]
    Underflow { h: f64, t: f64 },
}

/// A strictly monotone grid t₀, …, t_N with its horizon and end gap.
///
/// For forward-algorithmic-time runs the grid increases from 0 to T − δ.
/// For σ-grids it decreases from σ_max to σ_min (horizon = σ_max,
/// end gap = σ_min).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub times: Vec<f64>,
    pub horizon: f64,
    pub end_gap: f64,
}

impl StepSchedule {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Signed step t_{k+1} − t_k.
    pub fn h(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.times.len() < 2 {
            return Err(ScheduleError::Invalid("need at least one step".into()));
        }
        let increasing = self.times[1] > self.times[0];
        for w in self.times.windows(2) {
            if (w[1] > w[0]) != increasing || w[1] == w[0] {
                return Err(ScheduleError::Invalid(
                    "grid must be strictly monotone".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Equispaced grid on [0, T − δ].
pub fn uniform_schedule(t_horizon: f64, n: usize, delta: f64) -> Result<StepSchedule, ScheduleError> {
    if n < 1 || delta < 0.0 || t_horizon <= delta {
        return Err(ScheduleError::Invalid(format!(
            "need T > delta >= 0 and N >= 1 (T = {t_horizon}, delta = {delta}, N = {n})"
        )));
    }
    let end = t_horizon - delta;
    let times = (0..=n).map(|k| end * k as f64 / n as f64).collect();
    Ok(StepSchedule {
        times,
        horizon: t_horizon,
        end_gap: delta,
    })
}

/// Geometric-gap grid: T − t_k = T·(δ/T)^{k/N}, so the remaining horizon
/// shrinks by a constant factor each step and doubling N nests the grid.
pub fn proportional_schedule(
    t_horizon: f64,
    n: usize,
    delta: f64,
) -> Result<StepSchedule, ScheduleError> {
    if n < 1 || delta <= 0.0 || t_horizon <= delta {
        return Err(ScheduleError::Invalid(format!(
            "need T > delta > 0 and N >= 1 (T = {t_horizon}, delta = {delta}, N = {n})"
        )));
    }
    let ratio = delta / t_horizon;
    let times = (0..=n)
        .map(|k| t_horizon - t_horizon * ratio.powf(k as f64 / n as f64))
        .collect();
    Ok(StepSchedule {
        times,
        horizon: t_horizon,
        end_gap: delta,
    })
}

/// The interpolated score-Lipschitz bound β̃_t = β̃₀/(1 − e^{−2(T−t)}).
pub fn beta_tilde(beta0: f64, t_horizon: f64, t: f64) -> f64 {
    beta0 / em1(2.0 * (t_horizon - t))
}

/// The theory schedule: horizon T = max(1, log((d+M₂²)/ε²)), end gap
/// δ = ε²/d + ε/M₂ (the second term dropped when M₂ < ε; δ capped at T/2),
/// and the left-endpoint recursion t_{k+1} = t_k + h(t_k) with
/// h(t) = C_h·ε/(β̃₀√((d+M₂²)T))·min{1, T−t}, clipped to land on T − δ.
pub fn theory_schedule(
    epsilon: f64,
    beta0: f64,
    d: usize,
    m2: f64,
    c_h: f64,
) -> Result<StepSchedule, ScheduleError> {
    if !(0.0..=1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(ScheduleError::Invalid(format!("epsilon = {epsilon} not in (0, 1]")));
    }
    if beta0 < 1.0 || d < 1 || m2 < 0.0 || c_h <= 0.0 {
        return Err(ScheduleError::Invalid(
            "need beta0 >= 1, d >= 1, M2 >= 0, C_h > 0".into(),
        ));
    }
    let df = d as f64;
    let t_horizon = (((df + m2 * m2) / (epsilon * epsilon)).ln()).max(1.0);
    let mut delta = epsilon * epsilon / df;
    if m2 >= epsilon {
        delta += epsilon / m2;
    }
    delta = delta.min(t_horizon / 2.0);
    let base = c_h * epsilon / (beta0 * ((df + m2 * m2) * t_horizon).sqrt());
    let end = t_horizon - delta;
    let mut times = vec![0.0];
    loop {
        let t = *times.last().unwrap();
        let h = base * (t_horizon - t).min(1.0);
        if h < 1e-14 {
            return Err(ScheduleError::Underflow { h, t });
        }
        let next = t + h;
        if next >= end {
            // Clip the final step onto the early-stopping endpoint.
            if end - t > 1e-14 {
                times.push(end);
            }
            break;
        }
        times.push(next);
    }
    Ok(StepSchedule {
        times,
        horizon: t_horizon,
        end_gap: delta,
    })
}

/// Power-law σ-grid: σ_i = (σ_max^{1/ρ} + (i/N)(σ_min^{1/ρ} − σ_max^{1/ρ}))^ρ,
/// decreasing from σ_max to σ_min. Default exponent ρ = 7.
pub fn log_sigma_schedule(
    sigma_min: f64,
    sigma_max: f64,
    rho_exponent: f64,
    n: usize,
) -> Result<StepSchedule, ScheduleError> {
    if !(sigma_min > 0.0 && sigma_min < sigma_max) || n < 1 || rho_exponent <= 0.0 {
        return Err(ScheduleError::Invalid(format!(
            "need 0 < sigma_min < sigma_max, N >= 1, rho > 0 \
             (sigma_min = {sigma_min}, sigma_max = {sigma_max}, N = {n}, rho = {rho_exponent})"
        )));
    }
    let a = sigma_max.powf(1.0 / rho_exponent);
    let b = sigma_min.powf(1.0 / rho_exponent);
    let times = (0..=n)
        .map(|i| (a + (i as f64 / n as f64) * (b - a)).powf(rho_exponent))
        .collect();
    Ok(StepSchedule {
        times,
        horizon: sigma_max,
        end_gap: sigma_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_matches_hand_grid() {
        let s = uniform_schedule(1.0, 2, 0.0).unwrap();
        assert_eq!(s.times, vec![0.0, 0.5, 1.0]);
        let s = uniform_schedule(2.0, 1, 0.5).unwrap();
        assert_eq!(s.times, vec![0.0, 1.5]);
        assert!(uniform_schedule(1.0, 0, 0.0).is_err());
        assert!(uniform_schedule(0.5, 4, 0.5).is_err());
    }

    #[test]
    fn proportional_grids_nest_on_doubling() {
        let coarse = proportional_schedule(3.0, 8, 0.1).unwrap();
        let fine = proportional_schedule(3.0, 16, 0.1).unwrap();
        for (k, t) in coarse.times.iter().enumerate() {
            assert!((fine.times[2 * k] - t).abs() < 1e-12);
        }
        assert!((coarse.times[8] - 2.9).abs() < 1e-12);
        coarse.validate().unwrap();
    }

    #[test]
    fn theory_schedule_shape() {
        let s = theory_schedule(0.1, 1.0, 16, 2.0, 0.05).unwrap();
        s.validate().unwrap();
        let t_exp = ((16.0 + 4.0) / 0.01f64).ln();
        assert!((s.horizon - t_exp).abs() < 1e-12);
        let delta_exp = 0.01 / 16.0 + 0.1 / 2.0;
        assert!((s.end_gap - delta_exp).abs() < 1e-12);
        let last = *s.times.last().unwrap();
        assert!((last - (s.horizon - s.end_gap)).abs() < 1e-12);
        // Steps shrink near the end and h·β̃ stays well below 1.
        let n = s.n_steps();
        assert!(s.h(n - 1) < s.h(0));
        for k in 0..n {
            let hb = s.h(k) * beta_tilde(1.0, s.horizon, s.times[k]);
            assert!(hb < 0.5, "h·β̃ = {hb} at k = {k}");
        }
    }

    #[test]
    fn theory_schedule_proportionality_within_factor_two() {
        let s = theory_schedule(0.1, 1.0, 4, 2.0, 0.05).unwrap();
        let base = 0.05 * 0.1 / (((4.0 + 4.0) * s.horizon).sqrt());
        for k in 0..s.n_steps() - 1 {
            // Skip the clipped final step.
            let ratio = s.h(k) / em1(2.0 * (s.horizon - s.times[k])) / base;
            assert!(ratio > 0.49 && ratio < 2.01, "ratio {ratio} at k = {k}");
        }
    }

    #[test]
    fn theory_schedule_step_count_scalings() {
        let count = |eps: f64, d: usize| theory_schedule(eps, 1.0, d, 2.0, 0.05).unwrap().n_steps() as f64;
        // Dimension scaling tracks √d (up to the √T drift): ratio near 2.
        for &eps in &[0.1, 0.05] {
            for &d in &[4usize, 16] {
                let r = count(eps, 4 * d) / count(eps, d);
                assert!(r > 1.8 && r < 2.3, "d-ratio {r} at eps = {eps}, d = {d}");
            }
        }
        // Accuracy scaling: N grows faster than 2× per ε-halving because the
        // horizon T also grows; the measured ratio sits near 2.5–2.9.
        for &d in &[4usize, 16, 64] {
            let r = count(0.05, d) / count(0.1, d);
            assert!(r > 2.3 && r < 3.0, "eps-ratio {r} at d = {d}");
        }
    }

    #[test]
    fn theory_schedule_m2_below_epsilon_corner() {
        let s = theory_schedule(0.5, 1.0, 4, 0.1, 0.05).unwrap();
        // ε/M₂ dropped: δ = ε²/d (capped at T/2).
        let expected = (0.25f64 / 4.0).min(s.horizon / 2.0);
        assert!((s.end_gap - expected).abs() < 1e-12);
    }

    #[test]
    fn sigma_grid_shape_and_monotonicity() {
        let s = log_sigma_schedule(0.02, 10.0, 7.0, 12).unwrap();
        s.validate().unwrap();
        assert!((s.times[0] - 10.0).abs() < 1e-12);
        assert!((s.times[12] - 0.02).abs() < 1e-12);
        for w in s.times.windows(2) {
            assert!(w[1] < w[0]);
        }
        // ρ = 1 is equispaced.
        let lin = log_sigma_schedule(1.0, 5.0, 1.0, 4).unwrap();
        for w in lin.times.windows(2) {
            assert!((w[1] - w[0] + 1.0).abs() < 1e-12);
        }
        // N = 1 is just the two endpoints.
        let two = log_sigma_schedule(0.5, 2.0, 7.0, 1).unwrap();
        assert_eq!(two.times.len(), 2);
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let s = theory_schedule(0.1, 1.0, 8, 1.5, 0.05).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: StepSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
