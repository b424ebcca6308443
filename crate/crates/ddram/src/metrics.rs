//! Distribution distances, convergence-order fitting, and assumption audits.
//!
//! Closed forms where they exist (Bures–Wasserstein and KL between
//! Gaussians), sliced Wasserstein-2 with shared random projections for
//! empirical laws, moment gaps against analytic marginals, log–log order
//! fits with jackknife bands, and Monte Carlo audits of the score-accuracy /
//! second-moment / score-Lipschitz assumptions.

use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;
use rand::Rng;

use crate::numeric::em1;
use crate::rngstream::stream;
use crate::target::{MarginalLaw, ScoreField, TargetError, TargetFamily};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("covariance not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("need at least {need} data points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// Symmetric PSD square root via spectral decomposition.
fn psd_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricError> {
    let eig = s.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(MetricError::NotPsd(min));
    }
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose())
}

/// Bures–Wasserstein distance W₂ between two Gaussians.
pub fn w2_gaussian(
    m1: &DVector<f64>,
    s1: &DMatrix<f64>,
    m2: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> Result<f64, MetricError> {
    let root1 = psd_sqrt(s1)?;
    let cross = psd_sqrt(&(&root1 * s2 * &root1))?;
    let bures2 = (s1.trace() + s2.trace() - 2.0 * cross.trace()).max(0.0);
    Ok(((m1 - m2).norm_squared() + bures2).sqrt())
}

/// KL(N(m1, S1) ‖ N(m2, S2)).
pub fn kl_gaussian(
    m1: &DVector<f64>,
    s1: &DMatrix<f64>,
    m2: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> Result<f64, MetricError> {
    let d = m1.len() as f64;
    let chol2 = s2
        .clone()
        .cholesky()
        .ok_or(MetricError::NotPsd(f64::NEG_INFINITY))?;
    let chol1 = s1
        .clone()
        .cholesky()
        .ok_or(MetricError::NotPsd(f64::NEG_INFINITY))?;
    let logdet2: f64 = chol2.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let logdet1: f64 = chol1.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let diff = m2 - m1;
    let quad = diff.dot(&chol2.solve(&diff));
    let trace = chol2.solve(s1).trace();
    Ok(0.5 * (trace + quad - d + logdet2 - logdet1))
}

/// Random unit projections shared by seed (one stream per projection index).
pub fn projections(dim: usize, n_proj: usize, seed: u64) -> Vec<DVector<f64>> {
    (0..n_proj)
        .map(|p| {
            let mut rng = stream(seed, p as u64, "projection");
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = v.norm();
            v / n
        })
        .collect()
}

fn one_d_w2_squared(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if a.len() == b.len() {
        return a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / a.len() as f64;
    }
    // Unequal counts: couple through interpolated quantiles of the larger set.
    let (small, large) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    let n = small.len();
    let m = large.len();
    let mut acc = 0.0;
    for (i, &x) in small.iter().enumerate() {
        let q = (i as f64 + 0.5) / n as f64;
        let pos = q * m as f64 - 0.5;
        let lo = pos.floor().clamp(0.0, (m - 1) as f64) as usize;
        let hi = (lo + 1).min(m - 1);
        let frac = (pos - lo as f64).clamp(0.0, 1.0);
        let y = large[lo] * (1.0 - frac) + large[hi] * frac;
        acc += (x - y) * (x - y);
    }
    acc / n as f64
}

/// Sliced W₂ between two sample sets: √(mean over projections of the 1-D
/// quantile-coupled W₂²). Symmetric, and zero on identical sets.
pub fn sliced_w2(
    a: &[DVector<f64>],
    b: &[DVector<f64>],
    n_proj: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::TooFewPoints { need: 1, got: 0 });
    }
    let dirs = projections(a[0].len(), n_proj, seed);
    let mut acc = 0.0;
    for dir in &dirs {
        let pa: Vec<f64> = a.iter().map(|x| dir.dot(x)).collect();
        let pb: Vec<f64> = b.iter().map(|x| dir.dot(x)).collect();
        acc += one_d_w2_squared(pa, pb);
    }
    Ok((acc / n_proj as f64).sqrt())
}

/// Sliced W₂ from a sample set to the symmetric two-point law
/// ½δ_{+loc} + ½δ_{−loc}, using the exactly balanced reference quantiles
/// (first half of each projected order statistic list couples to −|⟨θ,loc⟩|,
/// second half to +|⟨θ,loc⟩|).
pub fn sliced_w2_to_two_point(
    samples: &[DVector<f64>],
    loc: &DVector<f64>,
    n_proj: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    if samples.len() < 2 || samples.len() % 2 != 0 {
        return Err(MetricError::TooFewPoints {
            need: 2,
            got: samples.len(),
        });
    }
    let dirs = projections(loc.len(), n_proj, seed);
    let half = samples.len() / 2;
    let mut acc = 0.0;
    for dir in &dirs {
        let mut proj: Vec<f64> = samples.iter().map(|x| dir.dot(x)).collect();
        proj.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let a = dir.dot(loc).abs();
        let mut s = 0.0;
        for (i, &p) in proj.iter().enumerate() {
            let r = if i < half { -a } else { a };
            s += (p - r) * (p - r);
        }
        acc += s / proj.len() as f64;
    }
    Ok((acc / n_proj as f64).sqrt())
}

/// Empirical-vs-analytic first two moments: (‖mean gap‖, max |cov gap|).
pub fn moment_gap(samples: &[DVector<f64>], law: &MarginalLaw) -> (f64, f64) {
    let d = law.dim();
    let n = samples.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in samples {
        mean += x;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in samples {
        let c = x - &mean;
        cov += &c * c.transpose();
    }
    cov /= n;
    let mean_gap = (&mean - law.mean()).norm();
    let cov_gap = (cov - law.cov()).abs().max();
    (mean_gap, cov_gap)
}

/// A fitted log–log convergence order.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% jackknife band half-width on the slope.
    pub band: f64,
}

/// Least-squares slope of log(error) against log(h), with a leave-one-out
/// jackknife band.
pub fn fit_order(hs: &[f64], errors: &[f64]) -> Result<OrderFit, MetricError> {
    if hs.len() != errors.len() || hs.len() < 3 {
        return Err(MetricError::TooFewPoints {
            need: 3,
            got: hs.len().min(errors.len()),
        });
    }
    let pairs: Vec<(f64, f64)> = hs
        .iter()
        .zip(errors)
        .map(|(&h, &e)| (h.ln(), e.max(1e-300).ln()))
        .collect();
    let fit = |pts: &[(f64, f64)]| -> (f64, f64) {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (slope, (sy - slope * sx) / n)
    };
    let (slope, intercept) = fit(&pairs);
    let n = pairs.len();
    let mut jack = Vec::with_capacity(n);
    for i in 0..n {
        let mut rest = pairs.clone();
        rest.remove(i);
        jack.push(fit(&rest).0);
    }
    let jbar = jack.iter().sum::<f64>() / n as f64;
    let var = (n - 1) as f64 / n as f64
        * jack.iter().map(|s| (s - jbar) * (s - jbar)).sum::<f64>();
    Ok(OrderFit {
        slope,
        intercept,
        band: 1.96 * var.sqrt(),
    })
}

/// One row of an assumption audit at a fixed time t.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuditRow {
    pub t: f64,
    /// √E_{π_t}‖∇log π_t − s‖² (score-accuracy assumption).
    pub l2_score_error: f64,
    /// max over sampled pairs of ‖Δs̃‖/‖Δx‖ for the relative score.
    pub relative_lipschitz: f64,
    /// max over sampled pairs of ‖Δs‖/‖Δx‖ for the absolute score — the
    /// quantity the score-Lipschitz assumption bounds by β̃₀/(1−e^{−2t}).
    pub absolute_lipschitz: f64,
    /// The 1/(1−e^{−2t}) reference profile at this t.
    pub lipschitz_profile: f64,
}

/// Audit report: per-t rows plus the target's second-moment bound.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub m2: f64,
}

/// Monte Carlo audit of the three runtime assumptions for a score field
/// against its family's analytic scores.
pub fn assumption_audit(
    score: &ScoreField,
    family: &TargetFamily,
    t_grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<AuditReport, MetricError> {
    let mut rows = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut rng = stream(seed, ti as u64, "audit");
        let mut sq = 0.0;
        let mut lip_rel: f64 = 0.0;
        let mut lip_abs: f64 = 0.0;
        for _ in 0..n_mc {
            let x = family.forward_sample(t, &mut rng)?;
            let exact = family.score(t, &x)?;
            let approx = score.absolute(t, &x)?;
            sq += (&approx - exact).norm_squared();
            // Independent random pair for the Lipschitz secant estimates.
            let y = family.forward_sample(t, &mut rng)?;
            let dx = (&x - &y).norm();
            if dx > 1e-9 {
                let sy = score.absolute(t, &y)?;
                lip_abs = lip_abs.max((&approx - &sy).norm() / dx);
                let drel = (&approx - sy) + (&x - &y);
                lip_rel = lip_rel.max(drel.norm() / dx);
            }
        }
        rows.push(AuditRow {
            t,
            l2_score_error: (sq / n_mc as f64).sqrt(),
            relative_lipschitz: lip_rel,
            absolute_lipschitz: lip_abs,
            lipschitz_profile: 1.0 / em1(2.0 * t),
        });
    }
    Ok(AuditReport {
        rows,
        m2: family.m2(),
    })
}
