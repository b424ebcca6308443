//! Path-coupled end-to-end convergence studies.
//!
//! Two drivers. `two_point_race` compares EMD, EED, and RMD chains on the
//! two-point-mass target with all samplers and all step counts driven by one
//! shared fine-grid Brownian path per chain: each fine cell carries the
//! jointly-Gaussian pair (exact-kernel noise, raw increment), coarse noises
//! are exact linear functionals of the cells, and the randomized midpoint's
//! partial-cell noise is drawn from its conditional law given the cell pair.
//! That removes almost all Monte Carlo noise from sampler comparisons.
//! `ode_race` compares the deterministic probability-flow integrators (Euler,
//! Heun, randomized midpoint) on a shared exact prior draw per chain.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::metrics::{sliced_w2, sliced_w2_to_two_point, MetricError};
use crate::noise::tau_from_uniform;
use crate::numeric::em1;
use crate::process::ProcessSpec;
use crate::rngstream::stream;
use crate::sampler::{run_chain, ChainOptions, SamplerError, SamplerKind};
use crate::schedule::{log_sigma_schedule, proportional_schedule, ScheduleError};
use crate::target::{ScoreField, TargetError, TargetFamily};

#[derive(Debug, thiserror::Error)]
pub enum CoupledError {
    #[error("bad study parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One (sampler, NFE) point of a race: the full-sample metric plus per-block
/// metrics for paired standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct RaceCell {
    pub sampler: String,
    pub n_steps: usize,
    pub nfe: usize,
    pub metric: f64,
    pub block_metrics: Vec<f64>,
}

/// Results of one replicate of a coupled race.
#[derive(Debug, Clone, Serialize)]
pub struct RaceResult {
    pub seed: u64,
    pub cells: Vec<RaceCell>,
}

/// Jointly-Gaussian noise functionals of one fine cell of length Δ:
/// E = √2∫ e^{−(end−s)}dB (exact-kernel noise, Var 1−e^{−2Δ}) and
/// W = √2·ΔB (raw increment, Var 2Δ, Cov(E, W) = 2(1−e^{−Δ})).
fn cell_pair(delta: f64, z: &DVector<f64>, z2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let sd_e = em1(2.0 * delta).sqrt();
    let c = 2.0 * em1(delta) / sd_e;
    let resid = (2.0 * delta - c * c).max(0.0).sqrt();
    (z * sd_e, z * c + z2 * resid)
}

/// The partial-cell kernel noise P = √2∫₀^{δτ} e^{−(δτ−s)}dB drawn from its
/// conditional law given the cell's (E, W), using the fresh normal `z3`.
fn conditional_partial(
    delta: f64,
    dtau: f64,
    e_cell: &DVector<f64>,
    w_cell: &DVector<f64>,
    z3: &DVector<f64>,
) -> DVector<f64> {
    let var_p = em1(2.0 * dtau);
    let c_pe = 2.0 * (-delta).exp() * dtau.sinh();
    let c_pw = 2.0 * em1(dtau);
    let m_ee = em1(2.0 * delta);
    let m_ew = 2.0 * em1(delta);
    let m_ww = 2.0 * delta;
    let det = m_ee * m_ww - m_ew * m_ew;
    let (a_e, a_w) = if det > 0.0 {
        (
            (m_ww * c_pe - m_ew * c_pw) / det,
            (m_ee * c_pw - m_ew * c_pe) / det,
        )
    } else {
        (0.0, 0.0)
    };
    let var_c = (var_p - a_e * c_pe - a_w * c_pw).max(0.0);
    e_cell * a_e + w_cell * a_w + z3 * var_c.sqrt()
}

/// Coupled two-point-mass race: RMD vs EED(exact) vs EMD at matched NFE.
///
/// Chains come in antithetic mirror pairs (negated start and noises, shared
/// midpoint uniforms). All samplers at the same NFE level reuse one
/// fine-grid noise path per chain, so cross-sampler comparisons are exactly
/// paired; levels use independent paths so across-NFE differences carry
/// honest chain noise. The metric is sliced W₂ to the two-point law;
/// `block_metrics` splits the chains into `n_blocks` consecutive blocks.
/// Every NFE must divide `n_fine` and be even (RMD runs NFE/2 steps).
#[allow(clippy::too_many_arguments)]
pub fn two_point_race(
    scale: f64,
    dim: usize,
    t_horizon: f64,
    delta: f64,
    nfes: &[usize],
    n_chains: usize,
    n_fine: usize,
    n_blocks: usize,
    n_proj: usize,
    seed: u64,
) -> Result<RaceResult, CoupledError> {
    if n_chains % (2 * n_blocks) != 0 || n_chains == 0 {
        return Err(CoupledError::BadParams(format!(
            "chain count {n_chains} must be a positive multiple of 2·{n_blocks} blocks"
        )));
    }
    for &nfe in nfes {
        if nfe < 2 || nfe % 2 != 0 || n_fine % nfe != 0 {
            return Err(CoupledError::BadParams(format!(
                "NFE {nfe} must be even and divide the fine grid size {n_fine}"
            )));
        }
    }
    let family = TargetFamily::TwoPoint { scale, dim };
    let fine = proportional_schedule(t_horizon, n_fine, delta)?;
    let ft = &fine.times;
    let deltas: Vec<f64> = (0..n_fine).map(|j| ft[j + 1] - ft[j]).collect();
    let samplers = [
        SamplerKind::Rmd,
        SamplerKind::Eed(crate::sampler::EedConvention::Exact),
        SamplerKind::Emd,
    ];

    // Per base chain: endpoints for (sampler, level) × {base, mirror}.
    let half = n_chains / 2;
    let per_chain: Vec<Vec<[DVector<f64>; 2]>> = (0..half)
        .into_par_iter()
        .map(|c| -> Result<Vec<[DVector<f64>; 2]>, CoupledError> {
            // One fine noise grid per NFE level: samplers at the same level
            // share cells exactly (paired comparisons), while different
            // levels stay independent so across-NFE differences carry
            // honest chain-level noise.
            let level_cells: Vec<(Vec<DVector<f64>>, Vec<DVector<f64>>)> = (0..nfes.len())
                .map(|li| {
                    let mut rng = stream(seed, c as u64, &format!("race-cells-{li}"));
                    let mut e_cells = Vec::with_capacity(n_fine);
                    let mut w_cells = Vec::with_capacity(n_fine);
                    for &dlt in &deltas {
                        let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                        let z2 = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                        let (e, w) = cell_pair(dlt, &z, &z2);
                        e_cells.push(e);
                        w_cells.push(w);
                    }
                    (e_cells, w_cells)
                })
                .collect();
            let mut rng_init = stream(seed, c as u64, "race-init");
            let x0 =
                DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng_init));
            // Midpoint randomness, pre-drawn so the mirror twin can reuse the
            // uniforms while negating the Gaussians.
            let mut rng_tau = stream(seed, c as u64, "race-tau");
            let tau_draws: Vec<Vec<(f64, DVector<f64>)>> = nfes
                .iter()
                .map(|&nfe| {
                    (0..nfe / 2)
                        .map(|_| {
                            let u: f64 = rng_tau.gen();
                            let z3 = DVector::from_fn(dim, |_, _| {
                                StandardNormal.sample(&mut rng_tau)
                            });
                            (u, z3)
                        })
                        .collect()
                })
                .collect();

            let mut out = Vec::with_capacity(samplers.len() * nfes.len());
            for kind in samplers {
                for (li, &nfe) in nfes.iter().enumerate() {
                    let (e_cells, w_cells) = &level_cells[li];
                    let n_steps = if kind == SamplerKind::Rmd { nfe / 2 } else { nfe };
                    let stride = n_fine / n_steps;
                    let mut pair: Vec<DVector<f64>> = Vec::with_capacity(2);
                    for sign in [1.0f64, -1.0] {
                        let mut x = &x0 * sign;
                        for k in 0..n_steps {
                            let (j0, j1) = (k * stride, (k + 1) * stride);
                            let (t0, t1) = (ft[j0], ft[j1]);
                            let h = t1 - t0;
                            match kind {
                                SamplerKind::Emd => {
                                    let mut noise = DVector::zeros(dim);
                                    for j in j0..j1 {
                                        noise += &w_cells[j] * sign;
                                    }
                                    let s = family.relative_score(t_horizon - t0, &x)?;
                                    x = &x * (1.0 - h) + s * (2.0 * h) + noise;
                                }
                                SamplerKind::Eed(_) => {
                                    let mut noise = DVector::zeros(dim);
                                    for j in j0..j1 {
                                        noise +=
                                            &e_cells[j] * (sign * (-(t1 - ft[j + 1])).exp());
                                    }
                                    let s = family.relative_score(t_horizon - t0, &x)?;
                                    x = &x * (-h).exp() + s * (2.0 * em1(h)) + noise;
                                }
                                _ => {
                                    let (u, z3) = &tau_draws[li][k];
                                    let tau = tau_from_uniform(h, *u);
                                    let tm = t0 + tau;
                                    // Fine cell containing the midpoint time.
                                    let mut cs = j0;
                                    while cs + 1 < j1 && ft[cs + 1] <= tm {
                                        cs += 1;
                                    }
                                    let dtau = (tm - ft[cs]).clamp(0.0, deltas[cs]);
                                    let mut xi_plus = conditional_partial(
                                        deltas[cs],
                                        dtau,
                                        &(&e_cells[cs] * sign),
                                        &(&w_cells[cs] * sign),
                                        &(z3 * sign),
                                    );
                                    for j in j0..cs {
                                        xi_plus +=
                                            &e_cells[j] * (sign * (-(tm - ft[j + 1])).exp());
                                    }
                                    let mut xi = DVector::zeros(dim);
                                    for j in j0..j1 {
                                        xi += &e_cells[j] * (sign * (-(t1 - ft[j + 1])).exp());
                                    }
                                    let s0 = family.relative_score(t_horizon - t0, &x)?;
                                    let x_mid =
                                        &x * (-tau).exp() + s0 * (2.0 * em1(tau)) + xi_plus;
                                    let sm =
                                        family.relative_score(t_horizon - tm, &x_mid)?;
                                    x = &x * (-h).exp() + sm * (2.0 * em1(h)) + xi;
                                }
                            }
                        }
                        pair.push(x);
                    }
                    let twin = pair.pop().unwrap();
                    let base = pair.pop().unwrap();
                    out.push([base, twin]);
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    // Keyed merge: endpoints per (sampler, level), chains in fixed order.
    let loc = DVector::from_fn(dim, |i, _| if i == 0 { scale } else { 0.0 });
    let block_size = half / n_blocks;
    let mut cells = Vec::new();
    for (si, kind) in samplers.iter().enumerate() {
        for (li, &nfe) in nfes.iter().enumerate() {
            let idx = si * nfes.len() + li;
            let all: Vec<DVector<f64>> = per_chain
                .iter()
                .flat_map(|chain| chain[idx].iter().cloned())
                .collect();
            let metric = sliced_w2_to_two_point(&all, &loc, n_proj, seed)?;
            let mut block_metrics = Vec::with_capacity(n_blocks);
            for b in 0..n_blocks {
                let blk: Vec<DVector<f64>> = per_chain[b * block_size..(b + 1) * block_size]
                    .iter()
                    .flat_map(|chain| chain[idx].iter().cloned())
                    .collect();
                // Each block draws its own projection set so the block
                // spread reflects the sliced-metric estimator's noise, not
                // just chain noise; the headline metric keeps one shared
                // set so cross-sampler comparisons stay exactly paired.
                block_metrics.push(sliced_w2_to_two_point(
                    &blk,
                    &loc,
                    n_proj,
                    seed.wrapping_add(1 + b as u64),
                )?);
            }
            let n_steps = if *kind == SamplerKind::Rmd { nfe / 2 } else { nfe };
            cells.push(RaceCell {
                sampler: format!("{kind:?}"),
                n_steps,
                nfe,
                metric,
                block_metrics,
            });
        }
    }
    Ok(RaceResult { seed, cells })
}

/// Paired mean difference and its standard error between the block metrics of
/// two race cells (positive mean ⇒ `a` larger).
pub fn paired_difference(a: &RaceCell, b: &RaceCell) -> (f64, f64) {
    let n = a.block_metrics.len().min(b.block_metrics.len());
    let diffs: Vec<f64> = (0..n)
        .map(|i| a.block_metrics[i] - b.block_metrics[i])
        .collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Probability-flow ODE race on a process spec's σ-grid, shared exact prior
/// per chain across samplers. Each sampler runs `ns[i]` steps; the NFE uses
/// per-sampler accounting (Euler n, Heun 2n−1, randomized midpoint 2n).
/// The metric is sliced W₂ against `n_reference` fresh target draws.
#[allow(clippy::too_many_arguments)]
pub fn ode_race(
    family: &TargetFamily,
    spec: &ProcessSpec,
    kinds: &[SamplerKind],
    ns: &[usize],
    sigma_min: f64,
    sigma_max: f64,
    rho_exponent: f64,
    n_chains: usize,
    n_reference: usize,
    n_proj: usize,
    seed: u64,
) -> Result<RaceResult, CoupledError> {
    let spec = if spec.ode { spec.clone() } else { spec.clone().with_ode() };
    let score = ScoreField::exact(family.clone());
    let opts = ChainOptions::default();
    let mut cells = Vec::new();

    let mut ref_rng = stream(seed, 0, "ode-ref");
    let reference: Vec<DVector<f64>> = (0..n_reference)
        .map(|_| family.forward_sample(0.0, &mut ref_rng))
        .collect::<Result<_, _>>()?;

    for &kind in kinds {
        for &n in ns {
            let schedule = log_sigma_schedule(sigma_min, sigma_max, rho_exponent, n)?;
            let endpoints: Vec<DVector<f64>> = (0..n_chains)
                .into_par_iter()
                .map(|c| {
                    run_chain(kind, &spec, &score, &schedule, seed, c as u64, &opts)
                        .map(|r| r.x)
                })
                .collect::<Result<_, _>>()?;
            let metric = sliced_w2(&endpoints, &reference, n_proj, seed)?;
            cells.push(RaceCell {
                sampler: format!("{kind:?}"),
                n_steps: n,
                nfe: crate::sampler::nfe_for_steps(kind, n),
                metric,
                block_metrics: Vec::new(),
            });
        }
    }
    Ok(RaceResult { seed, cells })
}
