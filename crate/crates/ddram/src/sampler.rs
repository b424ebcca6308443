//! Discrete-time sampling kernels and the chain driver.
//!
//! The stochastic kernels are exponential-integrator updates of the reverse
//! dynamics with the relative score frozen at one (EMD/EED) or two (RMD)
//! time points; the randomized midpoint kernel queries the drift at a random
//! intermediate time to debias the integral approximation. A generalized
//! form works for any process spec through its integrating factors, and
//! degenerates to deterministic second-order ODE stepping when the churn
//! vanishes. Euler and Heun over the probability-flow drift are the
//! deterministic baselines.
//!
//! Pure `*_update` functions contain the arithmetic; `step_*` functions
//! query a score field; `run_chain` drives a full schedule with per-chain
//! RNG streams and NFE accounting.

use nalgebra::DVector;
use rand::Rng;

use crate::noise::{
    self, correlated_pair_from, gaussian_vector, general_tau_from_uniform, generalized_pair_from,
    tau_from_uniform, tau_truncated_from_uniform,
};
use crate::numeric::em1;
use crate::process::{IntegratingFactors, ProcessError, ProcessSpec};
use crate::rngstream::stream;
use crate::schedule::StepSchedule;
use crate::target::{sample_gaussian, ScoreField, TargetError};

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<SamplerError>,
    },
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Noise(#[from] noise::NoiseError),
    #[error("schedule invalid: {0}")]
    Schedule(String),
}

/// Which EED drift coefficient to use: the analytic-solution coefficient
/// 2(1−e^{−h}) or the literal 2(1−e^{−2h}) variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EedConvention {
    #[default]
    Exact,
    Literal,
}

/// All sampler kinds the driver knows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerKind {
    Emd,
    Eed(EedConvention),
    Rmd,
    /// RMD with the midpoint time truncated to [0, ϱ_k·h_k], ϱ_k = 1 − h_k^r.
    RmdTruncated { r: f64 },
    /// Integrating-factor RMD on the process spec's own time axis.
    RmdGeneral,
    /// RmdGeneral with the churn forced to zero.
    RmdOde,
    EulerOde,
    HeunOde,
}

impl SamplerKind {
    /// Score evaluations per step (Heun's final step costs 1, handled by
    /// the driver).
    pub fn nfe_per_step(&self) -> usize {
        match self {
            SamplerKind::Emd | SamplerKind::Eed(_) | SamplerKind::EulerOde => 1,
            _ => 2,
        }
    }

    /// True for the kinds stepping the forward-time process axis
    /// (σ-grids, decreasing times); false for the algorithmic-time kinds.
    pub fn uses_process_axis(&self) -> bool {
        matches!(
            self,
            SamplerKind::RmdGeneral | SamplerKind::RmdOde | SamplerKind::EulerOde | SamplerKind::HeunOde
        )
    }
}

// --- pure update arithmetic ------------------------------------------------

/// Exponential midpoint-free Euler: (1−h)x + 2h·s̃ + √(2h)·ξ.
pub fn emd_update(x: &DVector<f64>, h: f64, s_rel: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
    x * (1.0 - h) + s_rel * (2.0 * h) + xi * (2.0 * h).sqrt()
}

/// Exponential Euler: e^{−h}x + 2(1−e^{−h})·s̃ + √(1−e^{−2h})·ξ
/// (literal convention replaces the drift coefficient by 2(1−e^{−2h})).
pub fn eed_update(
    x: &DVector<f64>,
    h: f64,
    s_rel: &DVector<f64>,
    xi: &DVector<f64>,
    convention: EedConvention,
) -> DVector<f64> {
    let coeff = match convention {
        EedConvention::Exact => 2.0 * em1(h),
        EedConvention::Literal => 2.0 * em1(2.0 * h),
    };
    x * (-h).exp() + s_rel * coeff + xi * em1(2.0 * h).sqrt()
}

/// Midpoint state: X⁺ = e^{−τ}x + 2(1−e^{−τ})·s̃_left + ξ⁺.
pub fn rmd_midpoint_update(
    x: &DVector<f64>,
    tau: f64,
    s_rel_left: &DVector<f64>,
    xi_plus: &DVector<f64>,
) -> DVector<f64> {
    x * (-tau).exp() + s_rel_left * (2.0 * em1(tau)) + xi_plus
}

/// Full step: e^{−h}x + 2(1−e^{−h})·s̃_mid + ξ.
pub fn rmd_full_update(
    x: &DVector<f64>,
    h: f64,
    s_rel_mid: &DVector<f64>,
    xi: &DVector<f64>,
) -> DVector<f64> {
    x * (-h).exp() + s_rel_mid * (2.0 * em1(h)) + xi
}

// --- score-querying steps --------------------------------------------------

/// One EMD step on the algorithmic segment [t_left, t_left + h] with
/// horizon `t_horizon` (the score is queried at forward time T − t_left).
pub fn step_emd(
    score: &ScoreField,
    t_horizon: f64,
    x: &DVector<f64>,
    t_left: f64,
    h: f64,
    xi: &DVector<f64>,
) -> Result<DVector<f64>, SamplerError> {
    let s = score.relative(t_horizon - t_left, x)?;
    Ok(emd_update(x, h, &s, xi))
}

/// One EED step.
pub fn step_eed(
    score: &ScoreField,
    t_horizon: f64,
    x: &DVector<f64>,
    t_left: f64,
    h: f64,
    xi: &DVector<f64>,
    convention: EedConvention,
) -> Result<DVector<f64>, SamplerError> {
    let s = score.relative(t_horizon - t_left, x)?;
    Ok(eed_update(x, h, &s, xi, convention))
}

/// One randomized-midpoint step from the underlying draws (u, z₁, z₂);
/// `truncation_r` switches to the truncated midpoint law ϱ = 1 − h^r.
pub fn step_rmd(
    score: &ScoreField,
    t_horizon: f64,
    x: &DVector<f64>,
    t_left: f64,
    h: f64,
    u: f64,
    z1: &DVector<f64>,
    z2: &DVector<f64>,
    truncation_r: Option<f64>,
) -> Result<DVector<f64>, SamplerError> {
    let tau = match truncation_r {
        None => tau_from_uniform(h, u),
        Some(r) => {
            let rho = (1.0 - h.powf(r)).clamp(f64::MIN_POSITIVE, 1.0);
            tau_truncated_from_uniform(h, rho, u)
        }
    };
    let (xi_plus, xi) = correlated_pair_from(tau, h, z1, z2);
    let s_left = score.relative(t_horizon - t_left, x)?;
    let x_mid = rmd_midpoint_update(x, tau, &s_left, &xi_plus);
    let s_mid = score.relative(t_horizon - t_left - tau, &x_mid)?;
    Ok(rmd_full_update(x, h, &s_mid, &xi))
}

/// One generalized randomized-midpoint step on the process segment
/// [t₀, t₁] (either time direction), with residual drift `f` and the
/// factors based at t₀.
pub fn step_rmd_general(
    factors: &IntegratingFactors<'_>,
    t1: f64,
    f: &mut impl FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, SamplerError>,
    x: &DVector<f64>,
    u: f64,
    z1: &DVector<f64>,
    z2: &DVector<f64>,
) -> Result<DVector<f64>, SamplerError> {
    let t_tau = general_tau_from_uniform(factors, t1, u)?;
    let (xi_plus, xi) = generalized_pair_from(factors, t_tau, t1, z1, z2)?;
    let w_tau = factors.omega(t_tau)?;
    let w1 = factors.omega(t1)?;
    let f0 = f(factors.t0, x)?;
    let x_mid = x / w_tau + f0 * (factors.omega_int(t_tau)? / w_tau) + xi_plus;
    let f_mid = f(t_tau, &x_mid)?;
    Ok(x / w1 + f_mid * (factors.omega_int(t1)? / w1) + xi)
}

/// Explicit Euler on a deterministic drift.
pub fn step_euler_ode(
    drift: &mut impl FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, SamplerError>,
    x: &DVector<f64>,
    t0: f64,
    t1: f64,
) -> Result<DVector<f64>, SamplerError> {
    Ok(x + drift(t0, x)? * (t1 - t0))
}

/// Heun (trapezoidal predictor–corrector) on a deterministic drift.
pub fn step_heun_ode(
    drift: &mut impl FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, SamplerError>,
    x: &DVector<f64>,
    t0: f64,
    t1: f64,
) -> Result<DVector<f64>, SamplerError> {
    let h = t1 - t0;
    let d0 = drift(t0, x)?;
    let x_euler = x + &d0 * h;
    let d1 = drift(t1, &x_euler)?;
    Ok(x + (d0 + d1) * (0.5 * h))
}

// --- chain driver ----------------------------------------------------------

/// Per-chain options.
#[derive(Debug, Clone, Default)]
pub struct ChainOptions {
    pub record_trajectory: bool,
}

/// Final state of a chain.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub x: DVector<f64>,
    pub nfe: usize,
    pub trajectory: Option<Vec<DVector<f64>>>,
}

/// Run one chain of `kind` over `schedule`.
///
/// Algorithmic-time kinds (EMD/EED/RMD) expect an increasing grid on
/// [0, T − δ] with `schedule.horizon = T` and start from N(0, I). Process-
/// axis kinds expect decreasing process times (σ-grids) and start from the
/// spec's exact forward marginal at the first grid point.
///
/// Every step consumes (u, z₁, z₂) from the chain's stream in that fixed
/// order regardless of kind, so different samplers run on the same
/// (seed, chain) see identical underlying draws wherever their noise
/// dimensions align.
pub fn run_chain(
    kind: SamplerKind,
    spec: &ProcessSpec,
    score: &ScoreField,
    schedule: &StepSchedule,
    seed: u64,
    chain: u64,
    opts: &ChainOptions,
) -> Result<ChainResult, SamplerError> {
    schedule
        .validate()
        .map_err(|e| SamplerError::Schedule(e.to_string()))?;
    let d = score.family.dim();
    let mut rng = stream(seed, chain, "chain");
    let mut x = initial_state(kind, spec, score, schedule, seed, chain)?;
    let mut nfe = 0usize;
    let mut trajectory = opts.record_trajectory.then(|| vec![x.clone()]);
    let n = schedule.n_steps();

    for k in 0..n {
        let t0 = schedule.times[k];
        let t1 = schedule.times[k + 1];
        // Fixed draw order for the shared base stream.
        let u: f64 = rng.gen();
        let z1 = gaussian_vector(d, &mut rng);
        let z2 = gaussian_vector(d, &mut rng);
        let attach = |source: SamplerError| SamplerError::Step {
            step: k,
            source: Box::new(source),
        };

        x = match kind {
            SamplerKind::Emd => {
                nfe += 1;
                step_emd(score, schedule.horizon, &x, t0, t1 - t0, &z1).map_err(attach)?
            }
            SamplerKind::Eed(conv) => {
                nfe += 1;
                step_eed(score, schedule.horizon, &x, t0, t1 - t0, &z1, conv).map_err(attach)?
            }
            SamplerKind::Rmd | SamplerKind::RmdTruncated { .. } => {
                nfe += 2;
                let trunc = match kind {
                    SamplerKind::RmdTruncated { r } => Some(r),
                    _ => None,
                };
                step_rmd(score, schedule.horizon, &x, t0, t1 - t0, u, &z1, &z2, trunc)
                    .map_err(attach)?
            }
            SamplerKind::RmdGeneral | SamplerKind::RmdOde => {
                nfe += 2;
                let local;
                let spec_ref = if kind == SamplerKind::RmdOde && !spec.ode {
                    local = spec.clone().with_ode();
                    &local
                } else {
                    spec
                };
                let factors = spec_ref.factors(t0);
                let mut f = |t: f64, y: &DVector<f64>| {
                    Ok(spec_ref.residual_drift(score, t, y)?)
                };
                step_rmd_general(&factors, t1, &mut f, &x, u, &z1, &z2).map_err(attach)?
            }
            SamplerKind::EulerOde => {
                nfe += 1;
                let mut drift = |t: f64, y: &DVector<f64>| Ok(spec.drift(score, t, y)?);
                step_euler_ode(&mut drift, &x, t0, t1).map_err(attach)?
            }
            SamplerKind::HeunOde => {
                let mut drift = |t: f64, y: &DVector<f64>| Ok(spec.drift(score, t, y)?);
                if k + 1 == n {
                    // Final step falls back to Euler.
                    nfe += 1;
                    step_euler_ode(&mut drift, &x, t0, t1).map_err(attach)?
                } else {
                    nfe += 2;
                    step_heun_ode(&mut drift, &x, t0, t1).map_err(attach)?
                }
            }
        };
        if let Some(tr) = trajectory.as_mut() {
            tr.push(x.clone());
        }
    }
    Ok(ChainResult { x, nfe, trajectory })
}

fn initial_state(
    kind: SamplerKind,
    spec: &ProcessSpec,
    score: &ScoreField,
    schedule: &StepSchedule,
    seed: u64,
    chain: u64,
) -> Result<DVector<f64>, SamplerError> {
    let d = score.family.dim();
    let mut rng = stream(seed, chain, "init");
    if kind.uses_process_axis() {
        // Exact forward marginal at the first grid point:
        // X = c·(X₀ + σ·Z) with X₀ ∼ π₀.
        let t0 = schedule.times[0];
        let c = spec.c(t0);
        let sigma = spec.sigma(t0);
        let x0 = score.family.forward_sample(0.0, &mut rng).map_err(|e| {
            // Point masses at t = 0 are fine for sampling but route through
            // the generic draw below on failure.
            SamplerError::Target(e)
        });
        let x0 = match x0 {
            Ok(v) => v,
            Err(_) => sample_gaussian(
                &DVector::zeros(d),
                &nalgebra::DMatrix::identity(d, d),
                &mut rng,
            ),
        };
        let z = gaussian_vector(d, &mut rng);
        Ok((x0 + z * sigma) * c)
    } else {
        // γ = N(0, I); OU-style runs absorb the π_T-vs-γ gap into T.
        let _ = spec;
        Ok(gaussian_vector(d, &mut rng))
    }
}

/// The NFE cost of an n-step run (Figure-3 accounting): Euler n, Heun 2n−1,
/// midpoint kernels 2n, single-evaluation kernels n.
pub fn nfe_for_steps(kind: SamplerKind, n: usize) -> usize {
    match kind {
        SamplerKind::HeunOde => 2 * n - 1,
        _ => kind.nfe_per_step() * n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{LambdaChoice, ProcessKind};
    use crate::schedule::{theory_schedule, uniform_schedule};
    use crate::target::TargetFamily;
    use nalgebra::DMatrix;

    fn vec1(v: f64) -> DVector<f64> {
        DVector::from_vec(vec![v])
    }

    #[test]
    fn emd_arithmetic_example() {
        // d = 1, x = 1, h = 0.1, s(x) = −x (so s̃ = 0), ξ = 0 → 0.9.
        let out = emd_update(&vec1(1.0), 0.1, &vec1(0.0), &vec1(0.0));
        assert!((out[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn eed_arithmetic_examples() {
        let exact = eed_update(&vec1(1.0), 0.1, &vec1(1.0), &vec1(0.0), EedConvention::Exact);
        assert!((exact[0] - ((-0.1f64).exp() + 2.0 * em1(0.1))).abs() < 1e-15);
        let literal = eed_update(&vec1(1.0), 0.1, &vec1(1.0), &vec1(0.0), EedConvention::Literal);
        assert!((literal[0] - ((-0.1f64).exp() + 2.0 * em1(0.2))).abs() < 1e-15);
        assert!(exact[0] != literal[0]);
    }

    #[test]
    fn rmd_with_tau_forced_to_h_reduces_to_eed_with_midpoint_score() {
        let fam = TargetFamily::Gaussian {
            mean: vec1(0.5),
            cov: DMatrix::identity(1, 1) * 0.5,
        };
        let score = ScoreField::exact(fam.clone());
        let (t_horizon, t_left, h) = (3.0, 1.0, 0.25);
        let x = vec1(0.8);
        let z1 = vec1(0.3);
        // u = 0 forces τ = h, so ξ = ξ⁺ and the midpoint is a full EED step;
        // the final update re-evaluates the score at the advanced time.
        let out = step_rmd(&score, t_horizon, &x, t_left, h, 0.0, &z1, &vec1(9.9), None).unwrap();
        let xi = &z1 * em1(2.0 * h).sqrt();
        let s_left = fam.relative_score(t_horizon - t_left, &x).unwrap();
        let x_mid = eed_update(&x, h, &s_left, &z1, EedConvention::Exact);
        let s_mid = fam.relative_score(t_horizon - t_left - h, &x_mid).unwrap();
        let expected = rmd_full_update(&x, h, &s_mid, &xi);
        assert!((out - expected).norm() < 1e-14);
    }

    #[test]
    fn rmd_general_on_ou_matches_rmd_bitwise() {
        let fam = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
        let score = ScoreField::exact(fam);
        let spec = ProcessSpec::named(ProcessKind::Ou);
        let t_horizon = 3.0;
        let mut rng = stream(21, 0, "reduction");
        let mut max_dev: f64 = 0.0;
        for _ in 0..500 {
            let t_left = 0.1 + 2.0 * rng.gen::<f64>();
            let h = 0.01 + 0.5 * rng.gen::<f64>();
            let x = gaussian_vector(2, &mut rng);
            let u: f64 = rng.gen();
            let z1 = gaussian_vector(2, &mut rng);
            let z2 = gaussian_vector(2, &mut rng);
            let direct = step_rmd(&score, t_horizon, &x, t_left, h, u, &z1, &z2, None).unwrap();
            let t0 = t_horizon - t_left;
            let factors = spec.factors(t0);
            let mut f = |t: f64, y: &DVector<f64>| Ok(spec.residual_drift(&score, t, y)?);
            let general =
                step_rmd_general(&factors, t0 - h, &mut f, &x, u, &z1, &z2).unwrap();
            max_dev = max_dev.max((direct - general).norm());
        }
        assert!(max_dev < 1e-10, "max deviation {max_dev:.2e}");
    }

    #[test]
    fn rmd_general_with_lambda_zero_is_plain_randomized_euler() {
        let fam = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
        let score = ScoreField::exact(fam);
        let spec = ProcessSpec::named(ProcessKind::Ou).with_lambda(LambdaChoice::Zero);
        let mut rng = stream(22, 0, "rme");
        for _ in 0..200 {
            let t0 = 0.4 + 2.0 * rng.gen::<f64>();
            let h = 0.01 + 0.2 * rng.gen::<f64>();
            let t1 = t0 - h;
            let x = gaussian_vector(2, &mut rng);
            let u: f64 = rng.gen();
            let z1 = gaussian_vector(2, &mut rng);
            let z2 = gaussian_vector(2, &mut rng);
            let factors = spec.factors(t0);
            let mut f = |t: f64, y: &DVector<f64>| Ok(spec.residual_drift(&score, t, y)?);
            let general = step_rmd_general(&factors, t1, &mut f, &x, u, &z1, &z2).unwrap();
            // RME by hand: τ-offset uniform on the segment, noise √τ-scaled
            // accumulated diffusion; for the OU process g² = 2.
            let tau = (1.0 - u) * (t1 - t0); // signed offset toward t1
            let t_tau = t0 + tau;
            let xi_plus = &z1 * (2.0 * tau.abs()).sqrt();
            let x_mid = &x + spec.residual_drift(&score, t0, &x).unwrap() * tau + &xi_plus;
            let xi = &xi_plus + &z2 * (2.0 * (h - tau.abs())).sqrt();
            let expected =
                &x + spec.residual_drift(&score, t_tau, &x_mid).unwrap() * (t1 - t0) + xi;
            assert!((general - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn deterministic_linear_ode_integrates_exactly_with_zero_drift_residual() {
        // g ≡ 0, f ≡ 0: X_{t₁} = (ω(t₀)/ω(t₁))·x exactly.
        let spec = ProcessSpec::named(ProcessKind::Ou).with_ode();
        let (t0, t1) = (1.5, 0.8);
        let factors = spec.factors(t0);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let mut f =
            |_t: f64, y: &DVector<f64>| Ok(DVector::zeros(y.len()));
        let out = step_rmd_general(&factors, t1, &mut f, &x, 0.37, &x, &x).unwrap();
        let expected = &x / factors.omega(t1).unwrap();
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn euler_and_heun_on_linear_decay() {
        // dX = −X dt, h = 0.1: Euler → 0.9x; Heun → 0.905x.
        let mut drift = |_t: f64, y: &DVector<f64>| Ok(-y.clone());
        let x = vec1(1.0);
        let e = step_euler_ode(&mut drift, &x, 0.0, 0.1).unwrap();
        assert!((e[0] - 0.9).abs() < 1e-15);
        let h = step_heun_ode(&mut drift, &x, 0.0, 0.1).unwrap();
        assert!((h[0] - 0.905).abs() < 1e-15);
    }

    #[test]
    fn nfe_accounting_matches_figure_counts() {
        assert_eq!(nfe_for_steps(SamplerKind::EulerOde, 10), 10);
        assert_eq!(nfe_for_steps(SamplerKind::HeunOde, 10), 19);
        assert_eq!(nfe_for_steps(SamplerKind::Rmd, 10), 20);
        assert_eq!(nfe_for_steps(SamplerKind::RmdOde, 10), 20);
        assert_eq!(nfe_for_steps(SamplerKind::Emd, 10), 10);
    }

    #[test]
    fn chains_are_deterministic_and_count_nfe() {
        let score = ScoreField::exact(TargetFamily::standard(3));
        let spec = ProcessSpec::named(ProcessKind::Ou);
        let schedule = uniform_schedule(2.0, 12, 0.05).unwrap();
        let opts = ChainOptions::default();
        let a = run_chain(SamplerKind::Rmd, &spec, &score, &schedule, 5, 9, &opts).unwrap();
        let b = run_chain(SamplerKind::Rmd, &spec, &score, &schedule, 5, 9, &opts).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.nfe, 24);
        let h = run_chain(SamplerKind::HeunOde, &spec.clone().with_ode(), &score,
            &crate::schedule::log_sigma_schedule(0.05, 5.0, 7.0, 12).unwrap(), 5, 9, &opts)
            .unwrap();
        assert_eq!(h.nfe, 23);
    }

    #[test]
    fn stationary_target_stays_standard_normal_under_rmd() {
        let score = ScoreField::exact(TargetFamily::standard(2));
        let spec = ProcessSpec::named(ProcessKind::Ou);
        let schedule = theory_schedule(0.3, 1.0, 2, 1.5, 0.1).unwrap();
        let opts = ChainOptions::default();
        let n = 4000;
        let mut cov = DMatrix::zeros(2, 2);
        let mut mean = DVector::zeros(2);
        for chain in 0..n {
            let r = run_chain(SamplerKind::Rmd, &spec, &score, &schedule, 77, chain, &opts).unwrap();
            mean += &r.x;
            cov += &r.x * r.x.transpose();
        }
        mean /= n as f64;
        cov /= n as f64;
        assert!(mean.norm() < 0.06, "mean {mean:?}");
        let dev = (cov - DMatrix::identity(2, 2)).abs().max();
        assert!(dev < 0.08, "covariance deviation {dev}");
    }

    #[test]
    fn truncated_rmd_close_to_plain_rmd_in_distribution() {
        let score = ScoreField::exact(TargetFamily::standard(1));
        let spec = ProcessSpec::named(ProcessKind::Ou);
        let schedule = uniform_schedule(2.0, 10, 0.05).unwrap();
        let opts = ChainOptions::default();
        let n = 2000;
        let mut m_plain = 0.0;
        let mut m_trunc = 0.0;
        for chain in 0..n {
            m_plain += run_chain(SamplerKind::Rmd, &spec, &score, &schedule, 3, chain, &opts)
                .unwrap()
                .x[0]
                .powi(2);
            m_trunc += run_chain(
                SamplerKind::RmdTruncated { r: 4.0 },
                &spec,
                &score,
                &schedule,
                3,
                chain,
                &opts,
            )
            .unwrap()
            .x[0]
                .powi(2);
        }
        assert!((m_plain / n as f64 - 1.0).abs() < 0.1);
        assert!((m_trunc / n as f64 - 1.0).abs() < 0.1);
    }
}
