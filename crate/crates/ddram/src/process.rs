//! Process parameterizations and drift-splitting machinery.
//!
//! A sampling SDE is described by a scale function c(t), a noise level σ(t)
//! and a churn level β(t); its drift is
//!
//!   (ċ/c)·x − (c²σ̇σ + βσ²c²)·∇log π_t(x),
//!
//! with diffusion g(t) = √(2β)·σ·c, written in the forward-time variable and
//! integrated with t decreasing. A chosen λ(t) splits the drift into a linear
//! part λx (handled exactly through the integrating factor ω = exp(−∫λ)) and
//! a residual f_t(x) queried at randomized times. Ω = ∫ω normalizes the
//! midpoint density and η = ∫(ωg)² tracks accumulated noise variance;
//! closed forms are used where available with adaptive quadrature and
//! bracketed root finding as the fallback.

use crate::numeric::{em1, quad, root};
use crate::target::{ScoreField, TargetError, TargetFamily};
use nalgebra::DVector;

/// Default data scale for the network-adapted skip connection.
pub const SIGMA_DATA: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum ProcessError {
    #[error("spec degenerate on segment: {0}")]
    Degenerate(String),
    #[error("quadrature failure: {0}")]
    Quad(#[from] quad::QuadError),
    #[error("root finding failure: {0}")]
    Root(#[from] root::RootError),
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// Named (c, σ, β) parameterizations.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessKind {
    /// c = e^{−t}, σ = √(e^{2t}−1), β = 1/(1−e^{−2t}) — so g ≡ √2.
    Ou,
    /// c = e^{−B/2}, σ = √(e^B−1) with B(t) = ½(β_max−β_min)t² + β_min·t.
    Vp { beta_min: f64, beta_max: f64 },
    /// c ≡ 1, σ = √t on t ∈ [σ_min², σ_max²].
    Ve { sigma_min: f64, sigma_max: f64 },
    /// c ≡ 1, σ = t on t ∈ [σ_min, σ_max].
    Edm { sigma_min: f64, sigma_max: f64 },
    /// c ≡ 1, σ = t, with piecewise-constant diffusion g jumping at
    /// `t_break` — exercises declared-breakpoint quadrature.
    StepChurn {
        t_break: f64,
        g_before: f64,
        g_after: f64,
    },
}

/// How to split the drift into λ(t)·x + f_t(x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    /// λ ≡ 0: the residual carries everything (randomized midpoint with
    /// plain Euler updates).
    Zero,
    /// λ = ċ/c: extract only the scale drift.
    ScaleOnly,
    /// λ = ċ/c + (c²σ̇σ + c²βσ²)/σ_T²: extract the Gaussian part of the
    /// score as well, using the forward-process variance σ_T² at the start.
    RelativeScore,
    /// λ = ċ/c + (1 − c_skip(t))·σ̇/σ with c_skip = σ_data²/(σ² + σ_data²).
    NetworkAdapted,
}

/// A full process specification: kind + drift split + churn switch.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub lambda_choice: LambdaChoice,
    /// Forward-process variance at the chain's start time (used by
    /// `RelativeScore`); 1.0 for near-stationary starts.
    pub sigma_t2: f64,
    /// β ≡ 0: deterministic probability-flow mode.
    pub ode: bool,
}

impl ProcessSpec {
    /// A spec with the per-process default λ choice: relative score for OU
    /// and VP, network-adapted for VE, scale-only for EDM.
    pub fn named(kind: ProcessKind) -> Self {
        let lambda_choice = match kind {
            ProcessKind::Ou | ProcessKind::Vp { .. } => LambdaChoice::RelativeScore,
            ProcessKind::Ve { .. } => LambdaChoice::NetworkAdapted,
            ProcessKind::Edm { .. } | ProcessKind::StepChurn { .. } => LambdaChoice::ScaleOnly,
        };
        Self {
            kind,
            lambda_choice,
            sigma_t2: 1.0,
            ode: false,
        }
    }

    pub fn with_lambda(mut self, choice: LambdaChoice) -> Self {
        self.lambda_choice = choice;
        self
    }

    pub fn with_ode(mut self) -> Self {
        self.ode = true;
        self
    }

    /// Set σ_T² from the target's forward-process variance at `t_start`:
    /// c²·(v̄₀ + σ²) with v̄₀ the per-coordinate second moment of π₀.
    pub fn with_sigma_t2_from(mut self, family: &TargetFamily, t_start: f64) -> Self {
        let v0 = family.m2().powi(2) / family.dim() as f64;
        let c = self.c(t_start);
        let s = self.sigma(t_start);
        self.sigma_t2 = c * c * (v0 + s * s);
        self
    }

    // --- scalar functions -------------------------------------------------

    pub fn c(&self, t: f64) -> f64 {
        match &self.kind {
            ProcessKind::Ou => (-t).exp(),
            ProcessKind::Vp { .. } => (-0.5 * self.vp_b(t)).exp(),
            ProcessKind::Ve { .. } | ProcessKind::Edm { .. } | ProcessKind::StepChurn { .. } => 1.0,
        }
    }

    pub fn c_dot(&self, t: f64) -> f64 {
        match &self.kind {
            ProcessKind::Ou => -(-t).exp(),
            ProcessKind::Vp { .. } => -0.5 * self.vp_b_dot(t) * self.c(t),
            ProcessKind::Ve { .. } | ProcessKind::Edm { .. } | ProcessKind::StepChurn { .. } => 0.0,
        }
    }

    pub fn sigma(&self, t: f64) -> f64 {
        match &self.kind {
            ProcessKind::Ou => (2.0 * t).exp_m1().sqrt(),
            ProcessKind::Vp { .. } => self.vp_b(t).exp_m1().sqrt(),
            ProcessKind::Ve { .. } => t.sqrt(),
            ProcessKind::Edm { .. } | ProcessKind::StepChurn { .. } => t,
        }
    }

    pub fn sigma_dot(&self, t: f64) -> f64 {
        match &self.kind {
            ProcessKind::Ou => (2.0 * t).exp() / self.sigma(t),
            ProcessKind::Vp { .. } => {
                0.5 * self.vp_b_dot(t) * self.vp_b(t).exp() / self.sigma(t)
            }
            ProcessKind::Ve { .. } => 0.5 / t.sqrt(),
            ProcessKind::Edm { .. } | ProcessKind::StepChurn { .. } => 1.0,
        }
    }

    /// Churn level β(t) ≥ 0 (zero in ODE mode).
    pub fn beta(&self, t: f64) -> f64 {
        if self.ode {
            return 0.0;
        }
        match &self.kind {
            ProcessKind::Ou => 1.0 / em1(2.0 * t),
            ProcessKind::Vp { .. } => {
                // g² = B′(t), so β = B′ / (2 c² σ²) = B′ / (2(1 − e^{−B})).
                self.vp_b_dot(t) / (2.0 * em1(self.vp_b(t)))
            }
            // g² = d(σ²)/dt = 1, so β = 1/(2t).
            ProcessKind::Ve { .. } => 0.5 / t,
            // g² = d(σ²)/dt = 2t, so β = 1/t (marginal-preserving churn).
            ProcessKind::Edm { .. } => 1.0 / t,
            ProcessKind::StepChurn {
                t_break,
                g_before,
                g_after,
            } => {
                let g = if t < *t_break { *g_before } else { *g_after };
                g * g / (2.0 * t * t)
            }
        }
    }

    /// Diffusion coefficient g(t) = √(2β)·σ·c.
    pub fn g(&self, t: f64) -> f64 {
        if self.ode {
            return 0.0;
        }
        match &self.kind {
            // Exact closed forms avoid 0/0 at small t.
            ProcessKind::Ou => std::f64::consts::SQRT_2,
            ProcessKind::Vp { .. } => self.vp_b_dot(t).sqrt(),
            ProcessKind::Ve { .. } => 1.0,
            ProcessKind::Edm { .. } => (2.0 * t).sqrt(),
            ProcessKind::StepChurn {
                t_break,
                g_before,
                g_after,
            } => {
                if t < *t_break {
                    *g_before
                } else {
                    *g_after
                }
            }
        }
    }

    fn vp_b(&self, t: f64) -> f64 {
        match &self.kind {
            ProcessKind::Vp { beta_min, beta_max } => {
                0.5 * (beta_max - beta_min) * t * t + beta_min * t
            }
            _ => unreachable!(),
        }
    }

    fn vp_b_dot(&self, t: f64) -> f64 {
        match &self.kind {
            ProcessKind::Vp { beta_min, beta_max } => (beta_max - beta_min) * t + beta_min,
            _ => unreachable!(),
        }
    }

    /// Breakpoints the quadrature should never straddle.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ProcessKind::StepChurn { t_break, .. } => vec![*t_break],
            _ => vec![],
        }
    }

    // --- drift split ------------------------------------------------------

    /// The chosen λ(t).
    pub fn lambda(&self, t: f64) -> Result<f64, ProcessError> {
        let scale = self.c_dot(t) / self.c(t);
        Ok(match self.lambda_choice {
            LambdaChoice::Zero => 0.0,
            LambdaChoice::ScaleOnly => scale,
            LambdaChoice::RelativeScore => {
                let c2 = self.c(t) * self.c(t);
                let s = self.sigma(t);
                scale
                    + (c2 * self.sigma_dot(t) * s + c2 * self.beta(t) * s * s) / self.sigma_t2
            }
            LambdaChoice::NetworkAdapted => {
                let s = self.sigma(t);
                if s == 0.0 {
                    return Err(ProcessError::Degenerate(
                        "network-adapted λ undefined at σ = 0".into(),
                    ));
                }
                let c_skip = SIGMA_DATA * SIGMA_DATA / (s * s + SIGMA_DATA * SIGMA_DATA);
                scale + (1.0 - c_skip) * self.sigma_dot(t) / s
            }
        })
    }

    /// The marginal score ∇log π_t(x) at process time t, through the
    /// (c, σ) parameterization of the score field.
    pub fn marginal_score(
        &self,
        score: &ScoreField,
        t: f64,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>, ProcessError> {
        let c = self.c(t);
        Ok(score.reparametrized(c, self.sigma(t), x)? / c)
    }

    /// The full drift (ċ/c)x − (c²σ̇σ + βσ²c²)·∇log π_t(x).
    pub fn drift(
        &self,
        score: &ScoreField,
        t: f64,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>, ProcessError> {
        let c = self.c(t);
        let s = self.sigma(t);
        let coeff = c * c * (self.sigma_dot(t) * s + self.beta(t) * s * s);
        Ok(x * (self.c_dot(t) / c) - self.marginal_score(score, t, x)? * coeff)
    }

    /// Residual drift f_t(x) = drift − λ(t)x; the split identity
    /// λx + f = drift holds by construction.
    pub fn residual_drift(
        &self,
        score: &ScoreField,
        t: f64,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>, ProcessError> {
        Ok(self.drift(score, t, x)? - x * self.lambda(t)?)
    }

    /// Integrating factors based at `t0`, preferring closed forms.
    pub fn factors(&self, t0: f64) -> IntegratingFactors<'_> {
        if let Some(lambda) = self.constant_lambda() {
            let g = self.constant_g();
            IntegratingFactors {
                spec: self,
                t0,
                mode: FactorMode::ClosedForm { lambda, g },
                quad_tol: DEFAULT_QUAD_TOL,
                root_tol: DEFAULT_ROOT_TOL,
            }
        } else {
            self.factors_numeric(t0, DEFAULT_QUAD_TOL, DEFAULT_ROOT_TOL)
        }
    }

    /// Numeric-path factors (also used to cross-validate the closed forms).
    pub fn factors_numeric(&self, t0: f64, quad_tol: f64, root_tol: f64) -> IntegratingFactors<'_> {
        IntegratingFactors {
            spec: self,
            t0,
            mode: FactorMode::Numeric,
            quad_tol,
            root_tol,
        }
    }

    /// λ is constant for: Zero everywhere; ScaleOnly/RelativeScore on OU
    /// (all three λ-terms are time-independent there); ScaleOnly whenever
    /// c ≡ 1.
    fn constant_lambda(&self) -> Option<f64> {
        match self.lambda_choice {
            LambdaChoice::Zero => Some(0.0),
            LambdaChoice::ScaleOnly => match &self.kind {
                ProcessKind::Ou => Some(-1.0),
                ProcessKind::Ve { .. } | ProcessKind::Edm { .. } | ProcessKind::StepChurn { .. } => {
                    Some(0.0)
                }
                ProcessKind::Vp { .. } => None,
            },
            LambdaChoice::RelativeScore => match &self.kind {
                // ċ/c = −1, c²σ̇σ = 1 and c²βσ² = 1 (or 0 in ODE mode),
                // each independently of t.
                ProcessKind::Ou => {
                    let churn = if self.ode { 1.0 } else { 2.0 };
                    Some(-1.0 + churn / self.sigma_t2)
                }
                _ => None,
            },
            LambdaChoice::NetworkAdapted => None,
        }
    }

    /// g is constant (needed for the closed-form η) for OU, VE, and ODE mode.
    fn constant_g(&self) -> Option<f64> {
        if self.ode {
            return Some(0.0);
        }
        match &self.kind {
            ProcessKind::Ou => Some(std::f64::consts::SQRT_2),
            ProcessKind::Ve { .. } => Some(1.0),
            _ => None,
        }
    }
}

pub const DEFAULT_QUAD_TOL: f64 = 1e-12;
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum FactorMode {
    /// Constant λ; constant g if `Some` (else η falls back to quadrature).
    ClosedForm { lambda: f64, g: Option<f64> },
    Numeric,
}

/// ω/Ω/η based at a segment start t₀ (ω(t₀) = 1, Ω(t₀) = η(t₀) = 0).
#[derive(Debug, Clone)]
pub struct IntegratingFactors<'a> {
    spec: &'a ProcessSpec,
    pub t0: f64,
    mode: FactorMode,
    quad_tol: f64,
    root_tol: f64,
}

impl IntegratingFactors<'_> {
    /// ω(t) = exp(−∫_{t₀}^t λ).
    pub fn omega(&self, t: f64) -> Result<f64, ProcessError> {
        match &self.mode {
            FactorMode::ClosedForm { lambda, .. } => Ok((-lambda * (t - self.t0)).exp()),
            FactorMode::Numeric => {
                let integral = quad::integrate(
                    |u| self.spec.lambda(u).unwrap_or(f64::NAN),
                    self.t0,
                    t,
                    self.quad_tol,
                    &self.spec.breakpoints(),
                )?;
                Ok((-integral).exp())
            }
        }
    }

    /// Ω(t) = ∫_{t₀}^t ω.
    pub fn omega_int(&self, t: f64) -> Result<f64, ProcessError> {
        match &self.mode {
            FactorMode::ClosedForm { lambda, .. } => {
                let dt = t - self.t0;
                if lambda.abs() < 1e-14 {
                    Ok(dt)
                } else {
                    // (1 − e^{−λ·dt})/λ, cancellation-free.
                    Ok(em1(lambda * dt) / lambda)
                }
            }
            FactorMode::Numeric => Ok(quad::integrate(
                |u| self.omega(u).unwrap_or(f64::NAN),
                self.t0,
                t,
                self.quad_tol,
                &self.spec.breakpoints(),
            )?),
        }
    }

    /// η(t) = ∫_{t₀}^t (ω·g)².
    pub fn eta(&self, t: f64) -> Result<f64, ProcessError> {
        if let FactorMode::ClosedForm { lambda, g: Some(g) } = &self.mode {
            let dt = t - self.t0;
            return Ok(if lambda.abs() < 1e-14 {
                g * g * dt
            } else {
                g * g * em1(2.0 * lambda * dt) / (2.0 * lambda)
            });
        }
        Ok(quad::integrate(
            |u| {
                let w = self.omega(u).unwrap_or(f64::NAN) * self.spec.g(u);
                w * w
            },
            self.t0,
            t,
            self.quad_tol,
            &self.spec.breakpoints(),
        )?)
    }

    /// Invert Ω on the segment [t₀, t₁] (either time direction): the t with
    /// Ω(t) = y. Uses Ω's strict monotonicity (ω keeps sign) for the bracket.
    pub fn invert_omega_int(&self, y: f64, t1: f64) -> Result<f64, ProcessError> {
        if let FactorMode::ClosedForm { lambda, .. } = &self.mode {
            if lambda.abs() < 1e-14 {
                return Ok(self.t0 + y);
            }
            let inner = 1.0 - lambda * y;
            if inner <= 0.0 {
                return Err(ProcessError::Degenerate(format!(
                    "Ω⁻¹ target {y} outside range for λ = {lambda}"
                )));
            }
            return Ok(self.t0 - inner.ln() / lambda);
        }
        let w0 = self.omega(self.t0)?;
        let w1 = self.omega(t1)?;
        if w0.signum() != w1.signum() || w0 == 0.0 || w1 == 0.0 {
            return Err(ProcessError::Degenerate(
                "ω changes sign on segment; Ω not invertible".into(),
            ));
        }
        let (lo, hi) = if self.t0 <= t1 {
            (self.t0, t1)
        } else {
            (t1, self.t0)
        };
        Ok(root::brent(
            |t| self.omega_int(t).unwrap_or(f64::NAN) - y,
            lo,
            hi,
            self.root_tol,
            60,
        )?)
    }
}
