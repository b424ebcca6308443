//! Randomized midpoint time draws and the correlated noise pairs (ξ⁺, ξ).
//!
//! The midpoint time τ has density ∝ e^{τ−h} on [0, h] (optionally truncated
//! to [0, ϱh]); both are sampled by exact inverse CDFs. The two Gaussian
//! noises of a midpoint step are jointly Gaussian conditional on τ with
//!   Var ξ⁺ = 1−e^{−2τ},  Var ξ = 1−e^{−2h},  Cov = e^{τ−h} − e^{−(h+τ)},
//! realized by conditional simulation: ξ = e^{τ−h}ξ⁺ + √(1−e^{2(τ−h)})·Z₂.
//! The generalized form replaces the exponentials with the ω/η integrating
//! factors of an arbitrary process spec.
//!
//! Deterministic `*_from` variants take the underlying uniforms/Gaussians
//! explicitly, so different samplers can be driven from one shared base
//! stream for paired comparisons.

use crate::numeric::em1;
use crate::process::{IntegratingFactors, ProcessError};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, thiserror::Error)]
pub enum NoiseError {
    #[error("step size h = {0} must be positive")]
    BadStep(f64),
    #[error("truncation rho = {0} must lie in (0, 1)")]
    BadTruncation(f64),
    #[error("tau = {tau} outside [0, h = {h}]")]
    BadTau { tau: f64, h: f64 },
}

/// A drawn midpoint time with its step and truncation level.
#[derive(Debug, Clone, Copy)]
pub struct MidpointDraw {
    pub tau: f64,
    pub h: f64,
    /// ϱ ∈ (0, 1]; 1 means untruncated.
    pub truncation: f64,
}

/// The correlated step noises, conditional on τ.
#[derive(Debug, Clone)]
pub struct NoisePair {
    pub xi_plus: DVector<f64>,
    pub xi: DVector<f64>,
    pub tau: f64,
    pub h: f64,
}

/// Inverse CDF of the midpoint density: τ = h + log(1 + u(e^{−h} − 1)).
pub fn tau_from_uniform(h: f64, u: f64) -> f64 {
    // 1 + u(e^{−h}−1) = 1 − u(1−e^{−h}); ln_1p keeps precision at small h.
    h + (-u * em1(h)).ln_1p()
}

/// Draw τ with density e^{τ−h}/(1−e^{−h}) on [0, h].
pub fn sample_tau(h: f64, rng: &mut impl Rng) -> Result<f64, NoiseError> {
    if h <= 0.0 {
        return Err(NoiseError::BadStep(h));
    }
    Ok(tau_from_uniform(h, rng.gen()))
}

/// Inverse CDF of the renormalized density on [0, ρh]:
/// τ = h + log(e^{−h} + u(e^{(ρ−1)h} − e^{−h})) = log(1 + u(e^{ρh} − 1)).
pub fn tau_truncated_from_uniform(h: f64, rho: f64, u: f64) -> f64 {
    (u * (rho * h).exp_m1()).ln_1p()
}

/// Draw the truncated midpoint time on [0, ρh].
pub fn sample_tau_truncated(h: f64, rho: f64, rng: &mut impl Rng) -> Result<f64, NoiseError> {
    if h <= 0.0 {
        return Err(NoiseError::BadStep(h));
    }
    if !(0.0..1.0).contains(&rho) || rho == 0.0 {
        return Err(NoiseError::BadTruncation(rho));
    }
    Ok(tau_truncated_from_uniform(h, rho, rng.gen()))
}

/// Deterministic core of `correlated_pair` given the two Gaussian vectors.
pub fn correlated_pair_from(
    tau: f64,
    h: f64,
    z1: &DVector<f64>,
    z2: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let xi_plus = z1 * em1(2.0 * tau).sqrt();
    let xi = &xi_plus * (tau - h).exp() + z2 * em1(2.0 * (h - tau)).sqrt();
    (xi_plus, xi)
}

/// Sample (ξ⁺, ξ) for the plain (OU) kernel, conditional on τ.
pub fn correlated_pair(
    tau: f64,
    h: f64,
    dim: usize,
    rng: &mut impl Rng,
) -> Result<NoisePair, NoiseError> {
    if h <= 0.0 {
        return Err(NoiseError::BadStep(h));
    }
    if !(0.0..=h).contains(&tau) {
        return Err(NoiseError::BadTau { tau, h });
    }
    let z1 = gaussian_vector(dim, rng);
    let z2 = gaussian_vector(dim, rng);
    let (xi_plus, xi) = correlated_pair_from(tau, h, &z1, &z2);
    Ok(NoisePair { xi_plus, xi, tau, h })
}

/// The generalized midpoint time: t with Ω(t) = (1−u)·Ω(t₁) on [t₀, t₁]
/// (density ∝ ω on the segment, either time direction). The 1−u orientation
/// makes the OU instance agree with `tau_from_uniform` draw-for-draw on the
/// same uniform.
pub fn general_tau_from_uniform(
    factors: &IntegratingFactors<'_>,
    t1: f64,
    u: f64,
) -> Result<f64, ProcessError> {
    let target = (1.0 - u) * factors.omega_int(t1)?;
    factors.invert_omega_int(target, t1)
}

/// Deterministic core of `generalized_pair`: noises for a midpoint at time
/// t_τ on the segment [t₀, t₁] of the factors' spec.
pub fn generalized_pair_from(
    factors: &IntegratingFactors<'_>,
    t_tau: f64,
    t1: f64,
    z1: &DVector<f64>,
    z2: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), ProcessError> {
    let w_tau = factors.omega(t_tau)?;
    let w1 = factors.omega(t1)?;
    if w_tau == 0.0 || w1 == 0.0 {
        return Err(ProcessError::Degenerate(
            "ω vanishes on the segment".into(),
        ));
    }
    let eta_tau = factors.eta(t_tau)?;
    let eta_1 = factors.eta(t1)?;
    let xi_plus = z1 * (eta_tau.abs().sqrt() / w_tau);
    let xi = &xi_plus * (w_tau / w1) + z2 * ((eta_1 - eta_tau).abs().sqrt() / w1);
    Ok((xi_plus, xi))
}

/// Sample the generalized pair.
pub fn generalized_pair(
    factors: &IntegratingFactors<'_>,
    t_tau: f64,
    t1: f64,
    dim: usize,
    rng: &mut impl Rng,
) -> Result<(DVector<f64>, DVector<f64>), ProcessError> {
    let z1 = gaussian_vector(dim, rng);
    let z2 = gaussian_vector(dim, rng);
    generalized_pair_from(factors, t_tau, t1, &z1, &z2)
}

/// A standard Gaussian vector (coordinates drawn in index order).
pub fn gaussian_vector(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{LambdaChoice, ProcessKind, ProcessSpec};
    use crate::rngstream::stream;

    fn ks_distance(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn tau_inverse_cdf_boundaries() {
        let h = 0.7;
        assert!((tau_from_uniform(h, 0.0) - h).abs() < 1e-15);
        assert!(tau_from_uniform(h, 1.0).abs() < 1e-12);
        assert!(tau_truncated_from_uniform(h, 0.9, 0.0).abs() < 1e-15);
        assert!((tau_truncated_from_uniform(h, 0.9, 1.0) - 0.9 * h).abs() < 1e-12);
    }

    #[test]
    fn tau_law_matches_analytic_cdf() {
        for &h in &[0.05, 0.5, 1.0] {
            let mut rng = stream(1, 0, "tau-ks");
            let draws: Vec<f64> = (0..200_000)
                .map(|_| sample_tau(h, &mut rng).unwrap())
                .collect();
            let z = em1(h); // 1 - e^{-h}
            let ks = ks_distance(draws, |t| ((t - h).exp() - (-h).exp()) / z);
            assert!(ks < 0.006, "h = {h}: KS {ks}");
        }
    }

    #[test]
    fn truncated_tau_approaches_untruncated_as_rho_to_one() {
        let h = 0.5;
        let mut rng = stream(2, 0, "tau-trunc");
        let draws: Vec<f64> = (0..100_000)
            .map(|_| sample_tau_truncated(h, 1.0 - 1e-6, &mut rng).unwrap())
            .collect();
        let denom = em1(h);
        let ks = ks_distance(draws, |t| ((t - h).exp() - (-h as f64).exp()) / denom);
        assert!(ks < 0.01, "KS {ks}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut rng = stream(0, 0, "bad");
        assert!(sample_tau(-0.1, &mut rng).is_err());
        assert!(sample_tau_truncated(0.5, 0.0, &mut rng).is_err());
        assert!(sample_tau_truncated(0.5, 1.0, &mut rng).is_err());
        assert!(correlated_pair(0.6, 0.5, 1, &mut rng).is_err());
    }

    #[test]
    fn pair_boundary_cases() {
        let mut rng = stream(3, 0, "pair");
        let p = correlated_pair(0.5, 0.5, 4, &mut rng).unwrap();
        assert!((&p.xi - &p.xi_plus).norm() < 1e-14, "tau = h makes them equal");
        let p0 = correlated_pair(0.0, 0.5, 4, &mut rng).unwrap();
        assert!(p0.xi_plus.norm() == 0.0);
    }

    #[test]
    fn empirical_covariance_matches_the_lemma() {
        let (tau, h) = (0.3, 0.5);
        let mut rng = stream(4, 0, "cov");
        let n = 1_000_000;
        let (mut vp, mut vx, mut cov) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let p = correlated_pair(tau, h, 1, &mut rng).unwrap();
            vp += p.xi_plus[0] * p.xi_plus[0];
            vx += p.xi[0] * p.xi[0];
            cov += p.xi_plus[0] * p.xi[0];
        }
        let n = n as f64;
        let exact_vp = em1(0.6);
        let exact_cov = (-0.2f64).exp() - (-0.8f64).exp();
        let exact_vx = em1(1.0);
        assert!((vp / n - exact_vp).abs() < 5e-3);
        assert!((cov / n - exact_cov).abs() < 5e-3);
        assert!((vx / n - exact_vx).abs() < 5e-3);
    }

    #[test]
    fn generalized_matches_correlated_on_the_ou_instance() {
        // Forward-time OU segment t₀ → t₁ = t₀ − h with λ = +1: the
        // generalized formulas reduce to the plain exponentials.
        let spec = ProcessSpec::named(ProcessKind::Ou);
        let (t0, h) = (1.2, 0.35);
        let t1 = t0 - h;
        let f = spec.factors(t0);
        let mut rng = stream(5, 0, "gen");
        for _ in 0..200 {
            let u: f64 = rng.gen();
            let tau = tau_from_uniform(h, u);
            let t_tau = general_tau_from_uniform(&f, t1, u).unwrap();
            assert!((t_tau - (t0 - tau)).abs() < 1e-12, "τ orientation");
            let z1 = gaussian_vector(2, &mut rng);
            let z2 = gaussian_vector(2, &mut rng);
            let (gp, g) = generalized_pair_from(&f, t_tau, t1, &z1, &z2).unwrap();
            let (cp, c) = correlated_pair_from(tau, h, &z1, &z2);
            assert!((gp - cp).norm() < 1e-12);
            assert!((g - c).norm() < 1e-12);
        }
    }

    #[test]
    fn ode_mode_has_zero_noise() {
        let spec = ProcessSpec::named(ProcessKind::Edm {
            sigma_min: 0.02,
            sigma_max: 10.0,
        })
        .with_ode();
        let f = spec.factors(3.0);
        let z1 = DVector::from_vec(vec![1.0, -2.0]);
        let z2 = DVector::from_vec(vec![0.5, 0.5]);
        let (xi_plus, xi) = generalized_pair_from(&f, 2.0, 1.0, &z1, &z2).unwrap();
        assert!(xi_plus.norm() == 0.0 && xi.norm() == 0.0);
    }

    #[test]
    fn lambda_zero_general_tau_is_uniform_complement() {
        let spec = ProcessSpec::named(ProcessKind::Ou).with_lambda(LambdaChoice::Zero);
        let (t0, t1) = (2.0, 1.2);
        let f = spec.factors(t0);
        let t_tau = general_tau_from_uniform(&f, t1, 0.25).unwrap();
        // Ω(t) = t − t₀; target = 0.75·(t₁ − t₀) → t = t₀ + 0.75(t₁ − t₀).
        assert!((t_tau - (t0 + 0.75 * (t1 - t0))).abs() < 1e-12);
    }

    #[test]
    fn reverse_time_variances_nonnegative_for_edm() {
        let spec = ProcessSpec::named(ProcessKind::Edm {
            sigma_min: 0.02,
            sigma_max: 10.0,
        });
        let mut rng = stream(6, 0, "edm-rev");
        for _ in 0..100 {
            let t0 = 0.5 + 9.0 * rng.gen::<f64>();
            let h = 0.05 + 0.4 * t0 * rng.gen::<f64>();
            let t1 = t0 - h;
            let f = spec.factors(t0);
            let t_tau = general_tau_from_uniform(&f, t1, rng.gen()).unwrap();
            let z1 = gaussian_vector(1, &mut rng);
            let z2 = gaussian_vector(1, &mut rng);
            let (xi_plus, xi) = generalized_pair_from(&f, t_tau, t1, &z1, &z2).unwrap();
            assert!(xi_plus[0].is_finite() && xi[0].is_finite());
        }
    }
}
