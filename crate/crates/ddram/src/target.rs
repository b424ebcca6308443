//! Analytic target distributions and their noised marginals and scores.
//!
//! Three families are supported: a single Gaussian with arbitrary SPD
//! covariance, a finite Gaussian mixture, and a symmetric two-point mass at
//! ±scale·e₁. Under the standard noising semigroup (means contract by
//! e^{−t}, covariances relax to the identity as e^{−2t}Σ + (1−e^{−2t})I)
//! each family stays in closed form, so scores are exact and every sampler
//! can be measured against ground truth.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numeric::em1;

/// Times below this are refused for point-mass families (the marginal is
/// singular and the score diverges like 1/t).
pub const MIN_SINGULAR_TIME: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum TargetError {
    #[error("negative time t = {0}")]
    NegativeTime(f64),
    #[error("time t = {0} too close to the singular initial law (need t >= {MIN_SINGULAR_TIME})")]
    SingularTime(f64),
    #[error("invalid family: {0}")]
    Invalid(String),
}

/// A target distribution π₀ with closed-form noised marginals.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetFamily {
    Gaussian {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    },
    Mixture {
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covs: Vec<DMatrix<f64>>,
    },
    /// ½δ_{+scale·e₁} + ½δ_{−scale·e₁} in `dim` dimensions.
    TwoPoint { scale: f64, dim: usize },
}

/// Serialization schema for target families
/// (`{"variant": "gaussian"|"mixture"|"two_point", "dim": n, ...}`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian {
        dim: usize,
        #[serde(default)]
        mean: Option<Vec<f64>>,
        /// Diagonal covariance entries (shorthand).
        #[serde(default)]
        cov_diag: Option<Vec<f64>>,
        /// Full covariance matrix (row-major); wins over `cov_diag`.
        #[serde(default)]
        cov: Option<Vec<Vec<f64>>>,
    },
    Mixture {
        dim: usize,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        /// Isotropic per-component variances (shorthand)...
        #[serde(default)]
        vars: Option<Vec<f64>>,
        /// ...or full per-component covariance matrices.
        #[serde(default)]
        covs: Option<Vec<Vec<Vec<f64>>>>,
    },
    TwoPoint { dim: usize, scale: f64 },
}

impl TargetSpec {
    pub fn build(&self) -> Result<TargetFamily, TargetError> {
        let family = match self {
            TargetSpec::Gaussian {
                dim,
                mean,
                cov_diag,
                cov,
            } => {
                let d = *dim;
                let mean = DVector::from_vec(mean.clone().unwrap_or_else(|| vec![0.0; d]));
                let cov = if let Some(rows) = cov {
                    DMatrix::from_fn(d, d, |i, j| rows[i][j])
                } else if let Some(diag) = cov_diag {
                    DMatrix::from_diagonal(&DVector::from_vec(diag.clone()))
                } else {
                    DMatrix::identity(d, d)
                };
                TargetFamily::Gaussian { mean, cov }
            }
            TargetSpec::Mixture {
                dim,
                weights,
                means,
                vars,
                covs,
            } => {
                let d = *dim;
                let means: Vec<_> = means.iter().map(|m| DVector::from_vec(m.clone())).collect();
                let covs: Vec<DMatrix<f64>> = if let Some(covs) = covs {
                    covs.iter()
                        .map(|c| DMatrix::from_fn(d, d, |i, j| c[i][j]))
                        .collect()
                } else if let Some(vars) = vars {
                    vars.iter()
                        .map(|&v| DMatrix::identity(d, d) * v)
                        .collect()
                } else {
                    return Err(TargetError::Invalid(
                        "mixture needs `vars` or `covs`".into(),
                    ));
                };
                TargetFamily::Mixture {
                    weights: weights.clone(),
                    means,
                    covs,
                }
            }
            TargetSpec::TwoPoint { dim, scale } => TargetFamily::TwoPoint {
                scale: *scale,
                dim: *dim,
            },
        };
        family.validate()?;
        Ok(family)
    }
}

/// One Gaussian component of a (possibly mixed) law.
#[derive(Debug, Clone)]
pub struct Component {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// The family evolved to forward time `t`: always a Gaussian mixture
/// (point masses become zero-covariance limits at t = 0).
#[derive(Debug, Clone)]
pub struct MarginalLaw {
    pub components: Vec<Component>,
    pub t: f64,
}

impl MarginalLaw {
    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// Mean of the full mixture.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        for c in &self.components {
            m += &c.mean * c.weight;
        }
        m
    }

    /// Covariance of the full mixture (law of total covariance).
    pub fn cov(&self) -> DMatrix<f64> {
        let m = self.mean();
        let mut s = DMatrix::zeros(self.dim(), self.dim());
        for c in &self.components {
            let d = &c.mean - &m;
            s += (&c.cov + &d * d.transpose()) * c.weight;
        }
        s
    }
}

impl TargetFamily {
    pub fn standard(dim: usize) -> Self {
        TargetFamily::Gaussian {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetFamily::Gaussian { mean, .. } => mean.len(),
            TargetFamily::Mixture { means, .. } => means[0].len(),
            TargetFamily::TwoPoint { dim, .. } => *dim,
        }
    }

    /// True if π₀ has atoms (so t = 0 scores are undefined).
    pub fn is_singular(&self) -> bool {
        matches!(self, TargetFamily::TwoPoint { .. })
    }

    pub fn validate(&self) -> Result<(), TargetError> {
        match self {
            TargetFamily::Gaussian { mean, cov } => {
                check_cov(mean.len(), cov)?;
            }
            TargetFamily::Mixture {
                weights,
                means,
                covs,
            } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != covs.len()
                {
                    return Err(TargetError::Invalid(
                        "weights/means/covs lengths disagree or empty".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 || weights.iter().any(|&w| w < 0.0) {
                    return Err(TargetError::Invalid(format!(
                        "weights must be nonnegative and sum to 1 (sum = {total})"
                    )));
                }
                let d = means[0].len();
                for (m, c) in means.iter().zip(covs) {
                    if m.len() != d {
                        return Err(TargetError::Invalid("component dimensions differ".into()));
                    }
                    check_cov(d, c)?;
                }
            }
            TargetFamily::TwoPoint { scale, dim } => {
                if *scale <= 0.0 || *dim == 0 {
                    return Err(TargetError::Invalid(
                        "two-point family needs scale > 0, dim >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// √E‖X₀‖² — the second-moment bound of the target.
    pub fn m2(&self) -> f64 {
        match self {
            TargetFamily::Gaussian { mean, cov } => {
                (mean.norm_squared() + cov.trace()).sqrt()
            }
            TargetFamily::Mixture {
                weights,
                means,
                covs,
            } => weights
                .iter()
                .zip(means)
                .zip(covs)
                .map(|((w, m), c)| w * (m.norm_squared() + c.trace()))
                .sum::<f64>()
                .sqrt(),
            TargetFamily::TwoPoint { scale, .. } => *scale,
        }
    }

    /// The noised marginal at forward time `t`.
    pub fn marginal(&self, t: f64) -> Result<MarginalLaw, TargetError> {
        if t < 0.0 {
            return Err(TargetError::NegativeTime(t));
        }
        let decay = (-t).exp();
        let relax = em1(2.0 * t); // 1 - e^{-2t}
        let components = match self {
            TargetFamily::Gaussian { mean, cov } => vec![Component {
                weight: 1.0,
                mean: mean * decay,
                cov: cov * (decay * decay) + DMatrix::identity(mean.len(), mean.len()) * relax,
            }],
            TargetFamily::Mixture {
                weights,
                means,
                covs,
            } => weights
                .iter()
                .zip(means)
                .zip(covs)
                .map(|((w, m), c)| Component {
                    weight: *w,
                    mean: m * decay,
                    cov: c * (decay * decay) + DMatrix::identity(m.len(), m.len()) * relax,
                })
                .collect(),
            TargetFamily::TwoPoint { scale, dim } => {
                let mut loc = DVector::zeros(*dim);
                loc[0] = scale * decay;
                let cov = DMatrix::identity(*dim, *dim) * relax;
                vec![
                    Component {
                        weight: 0.5,
                        mean: loc.clone(),
                        cov: cov.clone(),
                    },
                    Component {
                        weight: 0.5,
                        mean: -loc,
                        cov,
                    },
                ]
            }
        };
        Ok(MarginalLaw { components, t })
    }

    /// Exact score ∇log π_t(x).
    pub fn score(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, TargetError> {
        self.check_score_time(t)?;
        if let TargetFamily::TwoPoint { scale, dim } = self {
            return Ok(two_point_score(*scale, *dim, t, x));
        }
        let law = self.marginal(t)?;
        Ok(mixture_score(&law.components, x))
    }

    /// Relative score ∇log π_t(x) + x (vanishes when π_t is standard normal).
    pub fn relative_score(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, TargetError> {
        Ok(self.score(t, x)? + x)
    }

    /// Log-density of π_t up to the exact normalizing constant
    /// (finite-difference oracle for the score).
    pub fn log_density(&self, t: f64, x: &DVector<f64>) -> Result<f64, TargetError> {
        self.check_score_time(t)?;
        let law = self.marginal(t)?;
        Ok(mixture_log_density(&law.components, x))
    }

    /// Score of the (c, σ)-parameterization: the family smoothed by N(0, σ²I),
    /// evaluated at x/c.
    pub fn reparametrized_score(
        &self,
        c: f64,
        sigma: f64,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>, TargetError> {
        if c <= 0.0 {
            return Err(TargetError::Invalid(format!("scale c = {c} must be positive")));
        }
        if sigma < 0.0 {
            return Err(TargetError::Invalid(format!("sigma = {sigma} must be >= 0")));
        }
        let y = x / c;
        if let TargetFamily::TwoPoint { scale, dim } = self {
            if sigma * sigma < MIN_SINGULAR_TIME {
                return Err(TargetError::SingularTime(0.0));
            }
            return Ok(two_point_mixture_score(*scale, *dim, sigma * sigma, &y));
        }
        if sigma == 0.0 {
            // No smoothing: the plain t = 0 score.
            return self.score(0.0, &y);
        }
        let comps = self.smoothed_components(sigma);
        Ok(mixture_score(&comps, &y))
    }

    /// Log-density of the σ-smoothed family at y (oracle for the above).
    pub fn smoothed_log_density(&self, sigma: f64, y: &DVector<f64>) -> f64 {
        mixture_log_density(&self.smoothed_components(sigma), y)
    }

    fn smoothed_components(&self, sigma: f64) -> Vec<Component> {
        let s2 = sigma * sigma;
        let bump = |c: &DMatrix<f64>| c + DMatrix::identity(c.nrows(), c.ncols()) * s2;
        match self {
            TargetFamily::Gaussian { mean, cov } => vec![Component {
                weight: 1.0,
                mean: mean.clone(),
                cov: bump(cov),
            }],
            TargetFamily::Mixture {
                weights,
                means,
                covs,
            } => weights
                .iter()
                .zip(means)
                .zip(covs)
                .map(|((w, m), c)| Component {
                    weight: *w,
                    mean: m.clone(),
                    cov: bump(c),
                })
                .collect(),
            TargetFamily::TwoPoint { scale, dim } => {
                let mut loc = DVector::zeros(*dim);
                loc[0] = *scale;
                let cov = DMatrix::identity(*dim, *dim) * s2;
                vec![
                    Component {
                        weight: 0.5,
                        mean: loc.clone(),
                        cov: cov.clone(),
                    },
                    Component {
                        weight: 0.5,
                        mean: -loc,
                        cov,
                    },
                ]
            }
        }
    }

    /// Exact draw from π_t.
    pub fn forward_sample(&self, t: f64, rng: &mut impl Rng) -> Result<DVector<f64>, TargetError> {
        let law = self.marginal(t)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = law.components.len() - 1;
        for (i, c) in law.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let c = &law.components[chosen];
        Ok(sample_gaussian(&c.mean, &c.cov, rng))
    }

    fn check_score_time(&self, t: f64) -> Result<(), TargetError> {
        if t < 0.0 {
            return Err(TargetError::NegativeTime(t));
        }
        if self.is_singular() && t < MIN_SINGULAR_TIME {
            return Err(TargetError::SingularTime(t));
        }
        Ok(())
    }
}

fn check_cov(d: usize, cov: &DMatrix<f64>) -> Result<(), TargetError> {
    if cov.nrows() != d || cov.ncols() != d {
        return Err(TargetError::Invalid("covariance shape mismatch".into()));
    }
    let asym = (cov - cov.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(TargetError::Invalid(format!(
            "covariance not symmetric (max asymmetry {asym:.2e})"
        )));
    }
    let min_eig = cov
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 {
        return Err(TargetError::Invalid(format!(
            "covariance not PSD (min eigenvalue {min_eig:.2e})"
        )));
    }
    Ok(())
}

/// Draw N(mean, cov) handling exactly-singular covariances (point masses at
/// t = 0) by falling back to a spectral square root.
pub fn sample_gaussian(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut impl Rng) -> DVector<f64> {
    let d = mean.len();
    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    if let Some(chol) = cov.clone().cholesky() {
        mean + chol.l() * z
    } else {
        let eig = cov.clone().symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        mean + &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * &eig.eigenvectors.transpose() * z
    }
}

/// Responsibility-weighted mixture score in log-sum-exp form.
fn mixture_score(components: &[Component], x: &DVector<f64>) -> DVector<f64> {
    let d = x.len();
    let mut logliks = Vec::with_capacity(components.len());
    let mut comp_scores = Vec::with_capacity(components.len());
    for c in components {
        let chol = c
            .cov
            .clone()
            .cholesky()
            .expect("marginal covariance must be positive definite at t > 0");
        let diff = x - &c.mean;
        let solved = chol.solve(&diff);
        let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        logliks.push(c.weight.ln() - 0.5 * diff.dot(&solved) - 0.5 * logdet);
        comp_scores.push(-solved);
    }
    let max_ll = logliks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logliks.iter().map(|&l| (l - max_ll).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut score = DVector::zeros(d);
    for (w, s) in weights.iter().zip(&comp_scores) {
        score += s * (w / total);
    }
    score
}

fn mixture_log_density(components: &[Component], x: &DVector<f64>) -> f64 {
    let mut logliks = Vec::with_capacity(components.len());
    for c in components {
        let chol = c
            .cov
            .clone()
            .cholesky()
            .expect("covariance must be positive definite");
        let diff = x - &c.mean;
        let solved = chol.solve(&diff);
        let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        logliks.push(c.weight.ln() - 0.5 * diff.dot(&solved) - 0.5 * logdet);
    }
    let max_ll = logliks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max_ll + logliks.iter().map(|&l| (l - max_ll).exp()).sum::<f64>().ln()
}

/// Closed-form two-point-mass score at t > 0:
/// log π_t(x) = −‖x‖²/(2v) + log cosh(a_t x₁ / v) + const,
/// with a_t = e^{−t}·scale and v = 1 − e^{−2t}. The tanh argument is clamped
/// to ±30 to avoid overflow as t → 0 (where the Hessian blows up like 1/t²).
fn two_point_score(scale: f64, dim: usize, t: f64, x: &DVector<f64>) -> DVector<f64> {
    let a_t = scale * (-t).exp();
    let v = em1(2.0 * t);
    two_point_score_mv(a_t, v, dim, x)
}

/// Same closed form for a generic two-point mixture N(±a·e₁, v·I).
fn two_point_mixture_score(a: f64, dim: usize, v: f64, x: &DVector<f64>) -> DVector<f64> {
    two_point_score_mv(a, v, dim, x)
}

fn two_point_score_mv(a: f64, v: f64, dim: usize, x: &DVector<f64>) -> DVector<f64> {
    let mut s = x * (-1.0 / v);
    let arg = (a * x[0] / v).clamp(-30.0, 30.0);
    s[0] += (a / v) * arg.tanh();
    let _ = dim;
    s
}

/// A time-indexed score field: the exact analytic score, optionally with a
/// fixed deterministic perturbation of prescribed L²(π_t) size.
///
/// The perturbation is u_i(x) = √(2/d)·sin(x_i + i): smooth, bounded, with
/// E‖u‖² ≈ 1 under near-standard marginals, so `epsilon·u` realizes an
/// L² score error of ≈ epsilon and inflates the Lipschitz constant by at
/// most epsilon·√(2/d) per coordinate.
#[derive(Debug, Clone)]
pub struct ScoreField {
    pub family: TargetFamily,
    pub epsilon: f64,
}

impl ScoreField {
    pub fn exact(family: TargetFamily) -> Self {
        Self { family, epsilon: 0.0 }
    }

    pub fn perturbed(family: TargetFamily, epsilon: f64) -> Self {
        assert!(epsilon >= 0.0);
        Self { family, epsilon }
    }

    /// The deterministic unit-scale perturbation field.
    pub fn perturbation(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = x.len() as f64;
        DVector::from_fn(x.len(), |i, _| (2.0 / d).sqrt() * (x[i] + i as f64).sin())
    }

    /// ∇log π_t(x) (+ perturbation).
    pub fn absolute(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, TargetError> {
        let mut s = self.family.score(t, x)?;
        if self.epsilon > 0.0 {
            s += self.perturbation(x) * self.epsilon;
        }
        Ok(s)
    }

    /// Relative score ∇log π_t(x) + x (+ the same perturbation; the offset
    /// x is independent of fidelity, so relative − absolute = x exactly).
    pub fn relative(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, TargetError> {
        Ok(self.absolute(t, x)? + x)
    }

    /// (c, σ)-parameterized score (exact form; perturbations target the
    /// forward-time parameterization used by the error studies).
    pub fn reparametrized(
        &self,
        c: f64,
        sigma: f64,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>, TargetError> {
        self.family.reparametrized_score(c, sigma, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngstream::stream;

    fn fd_score(family: &TargetFamily, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let h = 1e-5;
        DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (family.log_density(t, &xp).unwrap() - family.log_density(t, &xm).unwrap()) / (2.0 * h)
        })
    }

    fn test_families() -> Vec<TargetFamily> {
        vec![
            TargetFamily::standard(3),
            TargetFamily::Gaussian {
                mean: DVector::from_vec(vec![0.3, -1.0]),
                cov: DMatrix::from_row_slice(2, 2, &[0.25, 0.1, 0.1, 4.0]),
            },
            TargetFamily::Mixture {
                weights: vec![0.5, 0.3, 0.2],
                means: vec![
                    DVector::from_vec(vec![1.2, 0.0]),
                    DVector::from_vec(vec![-0.8, 0.9]),
                    DVector::from_vec(vec![0.0, -1.1]),
                ],
                covs: vec![
                    DMatrix::identity(2, 2) * 0.10,
                    DMatrix::identity(2, 2) * 0.15,
                    DMatrix::identity(2, 2) * 0.08,
                ],
            },
            TargetFamily::TwoPoint { scale: 1.0, dim: 2 },
        ]
    }

    #[test]
    fn standard_gaussian_is_stationary_with_score_minus_x() {
        let fam = TargetFamily::standard(3);
        let x = DVector::from_vec(vec![0.4, -1.2, 2.0]);
        for &t in &[0.0, 0.5, 1.0, 5.0] {
            let s = fam.score(t, &x).unwrap();
            assert!((&s + &x).norm() < 1e-12);
            assert!(fam.relative_score(t, &x).unwrap().norm() < 1e-12);
        }
        let law = fam.marginal(1.0).unwrap();
        assert!((law.cov() - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn isotropic_gaussian_score_matches_closed_form() {
        let sigma2 = 4.0;
        let fam = TargetFamily::Gaussian {
            mean: DVector::zeros(2),
            cov: DMatrix::identity(2, 2) * sigma2,
        };
        let t: f64 = 0.7;
        let x = DVector::from_vec(vec![1.0, -0.5]);
        let denom = (-2.0 * t).exp() * sigma2 + em1(2.0 * t);
        let s = fam.score(t, &x).unwrap();
        assert!((&s + &x / denom).norm() < 1e-12);
    }

    #[test]
    fn score_gradcheck_all_families() {
        for fam in test_families() {
            for &t in &[0.05, 0.5, 2.0] {
                let mut rng = stream(11, 0, "gradcheck");
                for _ in 0..20 {
                    let x = DVector::from_fn(fam.dim(), |_, _| {
                        rng.sample::<f64, _>(StandardNormal) * 1.5
                    });
                    let analytic = fam.score(t, &x).unwrap();
                    let numeric = fd_score(&fam, t, &x);
                    let rel = (&analytic - &numeric).norm() / analytic.norm().max(1.0);
                    assert!(rel < 1e-5, "family {fam:?}, t={t}: rel error {rel:.2e}");
                }
            }
        }
    }

    #[test]
    fn two_point_marginal_is_symmetric_mixture() {
        let fam = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
        let t = 0.4;
        let law = fam.marginal(t).unwrap();
        assert_eq!(law.components.len(), 2);
        let v = em1(2.0 * t);
        assert!((law.components[0].mean[0] - (-t as f64).exp()).abs() < 1e-14);
        assert!((law.components[0].cov[(0, 0)] - v).abs() < 1e-14);
        assert!((law.components[0].mean.clone() + &law.components[1].mean).norm() < 1e-14);
    }

    #[test]
    fn two_point_score_refuses_singular_time() {
        let fam = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
        assert!(matches!(
            fam.score(0.0, &DVector::zeros(2)),
            Err(TargetError::SingularTime(_))
        ));
    }

    #[test]
    fn semigroup_property_for_gaussians() {
        let fam = TargetFamily::Gaussian {
            mean: DVector::from_vec(vec![1.0, -2.0]),
            cov: DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 1.5]),
        };
        let (s, t) = (0.3, 0.9);
        let mid = fam.marginal(s).unwrap();
        let mid_family = TargetFamily::Gaussian {
            mean: mid.components[0].mean.clone(),
            cov: mid.components[0].cov.clone(),
        };
        let two_step = mid_family.marginal(t).unwrap();
        let direct = fam.marginal(s + t).unwrap();
        assert!((&two_step.components[0].mean - &direct.components[0].mean).norm() < 1e-12);
        assert!(
            (&two_step.components[0].cov - &direct.components[0].cov).abs().max() < 1e-12
        );
    }

    #[test]
    fn relative_minus_absolute_is_exactly_x() {
        let field = ScoreField::perturbed(TargetFamily::standard(4), 0.3);
        let mut rng = stream(5, 0, "rel");
        for _ in 0..10 {
            let x = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let diff = field.relative(0.8, &x).unwrap() - field.absolute(0.8, &x).unwrap();
            assert!((diff - &x).norm() < 1e-15);
        }
    }

    #[test]
    fn reparametrized_score_consistent_with_forward_marginal() {
        // With c = e^{-t}, σ = √(e^{2t}-1): the marginal is the c-scaling of
        // the σ-smoothed family, so ∇log π_t(x) = (1/c)·s_smoothed(x/c),
        // i.e. reparametrized(c, σ, x) = c·score(t, x).
        for fam in test_families() {
            let t: f64 = 0.6;
            let c = (-t).exp();
            let sigma = ((2.0 * t).exp() - 1.0).sqrt();
            let x = DVector::from_fn(fam.dim(), |i, _| 0.3 * (i as f64 + 1.0));
            let lhs = fam.reparametrized_score(c, sigma, &x).unwrap();
            let rhs = fam.score(t, &x).unwrap() * c;
            assert!((lhs - rhs).norm() < 1e-10, "family {fam:?}");
        }
    }

    #[test]
    fn reparametrized_score_matches_finite_differences() {
        let fam = TargetFamily::Mixture {
            weights: vec![0.6, 0.4],
            means: vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![-1.0, 0.5])],
            covs: vec![DMatrix::identity(2, 2) * 0.2, DMatrix::identity(2, 2) * 0.3],
        };
        let (c, sigma) = (0.8, 0.9);
        let x = DVector::from_vec(vec![0.4, -0.2]);
        let analytic = fam.reparametrized_score(c, sigma, &x).unwrap();
        let y = &x / c;
        let h = 1e-5;
        let numeric = DVector::from_fn(2, |i, _| {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            (fam.smoothed_log_density(sigma, &yp) - fam.smoothed_log_density(sigma, &ym))
                / (2.0 * h)
        });
        assert!((analytic - numeric).norm() < 1e-5);
    }

    #[test]
    fn forward_sample_matches_marginal_moments() {
        let fam = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
        let t = 0.5;
        let mut rng = stream(42, 0, "fwd");
        let n = 20_000;
        let mut mean = DVector::zeros(2);
        let mut second = 0.0;
        let mut positive = 0usize;
        for _ in 0..n {
            let x = fam.forward_sample(t, &mut rng).unwrap();
            second += x.norm_squared();
            if x[0] > 0.0 {
                positive += 1;
            }
            mean += x;
        }
        mean /= n as f64;
        second /= n as f64;
        let law = fam.marginal(t).unwrap();
        let exact_second = law.cov().trace() + law.mean().norm_squared();
        assert!(mean.norm() < 0.03, "mean {mean:?}");
        assert!((second - exact_second).abs() < 0.05);
        let frac = positive as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "sign split {frac}");
    }

    #[test]
    fn perturbation_has_unit_scale_on_average() {
        let field = ScoreField::perturbed(TargetFamily::standard(4), 1.0);
        let mut rng = stream(9, 0, "perturb");
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            acc += field.perturbation(&x).norm_squared();
        }
        let rms = (acc / n as f64).sqrt();
        assert!(rms > 0.9 && rms < 1.1, "perturbation RMS {rms}");
    }

    #[test]
    fn target_spec_round_trip() {
        let spec = TargetSpec::Mixture {
            dim: 2,
            weights: vec![0.5, 0.5],
            means: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            vars: Some(vec![0.1, 0.2]),
            covs: None,
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: TargetSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), spec.build().unwrap());
        assert!(json.contains("\"variant\":\"mixture\""));
    }

    #[test]
    fn invalid_families_rejected() {
        let bad_weights = TargetFamily::Mixture {
            weights: vec![0.6, 0.6],
            means: vec![DVector::zeros(1), DVector::zeros(1)],
            covs: vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)],
        };
        assert!(bad_weights.validate().is_err());
        let bad_cov = TargetFamily::Gaussian {
            mean: DVector::zeros(2),
            cov: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]),
        };
        assert!(bad_cov.validate().is_err());
    }
}
