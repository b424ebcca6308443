//! Experiment configuration: TOML (or JSON) with unknown keys rejected.
//!
//! One `ExperimentConfig` drives every CLI command; command-specific sections
//! (`local_error`, `convergence`, `plotdata`) are optional and validated by
//! the command that needs them. `(seed, config)` fully determines outputs,
//! and every output file embeds `config_hash` so results stay traceable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::process::{LambdaChoice, ProcessKind, ProcessSpec};
use crate::sampler::{EedConvention, SamplerKind};
use crate::schedule::{
    log_sigma_schedule, proportional_schedule, theory_schedule, uniform_schedule, StepSchedule,
};
use crate::target::{TargetFamily, TargetSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_chains() -> usize {
    1000
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub target: TargetSpec,
    #[serde(default)]
    pub process: ProcessConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub metrics: Vec<MetricChoice>,
    #[serde(default)]
    pub local_error: Option<LocalErrorConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub plotdata: Option<PlotdataConfig>,
}

/// Process spec by name plus the drift-split options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub kind: ProcessKind,
    /// Default: the per-process recommendation.
    #[serde(default)]
    pub lambda: Option<LambdaChoice>,
    #[serde(default)]
    pub ode: bool,
    /// Forward-process variance at the chain start for the relative-score
    /// split; computed from the target when omitted.
    #[serde(default)]
    pub sigma_t2: Option<f64>,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            kind: ProcessKind::Ou,
            lambda: None,
            ode: false,
            sigma_t2: None,
        }
    }
}

impl ProcessConfig {
    /// Build the spec; `t_start` is the process time at the chain start
    /// (used to derive σ_T² from the target when not pinned).
    pub fn build(&self, family: &TargetFamily, t_start: f64) -> ProcessSpec {
        let mut spec = ProcessSpec::named(self.kind.clone());
        if let Some(l) = self.lambda {
            spec = spec.with_lambda(l);
        }
        if self.ode {
            spec = spec.with_ode();
        }
        match self.sigma_t2 {
            Some(v) => spec.sigma_t2 = v,
            None => spec = spec.with_sigma_t2_from(family, t_start),
        }
        spec
    }
}

/// Sampler kind names as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerName {
    Emd,
    Eed,
    Rmd,
    RmdTruncated,
    RmdGeneral,
    RmdOde,
    EulerOde,
    HeunOde,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerName,
    /// Truncation exponent r for `rmd_truncated` (ϱ = 1 − h^r).
    #[serde(default)]
    pub truncation_r: Option<f64>,
    #[serde(default)]
    pub eed_convention: Option<EedConvention>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerName::Rmd,
            truncation_r: None,
            eed_convention: None,
        }
    }
}

impl SamplerConfig {
    pub fn build(&self) -> Result<SamplerKind, ConfigError> {
        Ok(match self.kind {
            SamplerName::Emd => SamplerKind::Emd,
            SamplerName::Eed => SamplerKind::Eed(self.eed_convention.unwrap_or_default()),
            SamplerName::Rmd => SamplerKind::Rmd,
            SamplerName::RmdTruncated => SamplerKind::RmdTruncated {
                r: self.truncation_r.ok_or_else(|| {
                    ConfigError::Invalid("rmd_truncated requires truncation_r".into())
                })?,
            },
            SamplerName::RmdGeneral => SamplerKind::RmdGeneral,
            SamplerName::RmdOde => SamplerKind::RmdOde,
            SamplerName::EulerOde => SamplerKind::EulerOde,
            SamplerName::HeunOde => SamplerKind::HeunOde,
        })
    }
}

fn one() -> f64 {
    1.0
}
fn default_c_h() -> f64 {
    0.05
}
fn default_rho() -> f64 {
    7.0
}

/// Schedule generator + parameters, or an explicit grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Uniform {
        t_horizon: f64,
        n: usize,
        #[serde(default)]
        delta: f64,
    },
    Proportional {
        t_horizon: f64,
        n: usize,
        delta: f64,
    },
    Theory {
        epsilon: f64,
        #[serde(default = "one")]
        beta0: f64,
        /// Second-moment bound; the target's own M₂ when omitted.
        #[serde(default)]
        m2: Option<f64>,
        #[serde(default = "default_c_h")]
        c_h: f64,
    },
    LogSigma {
        sigma_min: f64,
        sigma_max: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        n: usize,
    },
    Explicit {
        times: Vec<f64>,
        t_horizon: f64,
        end_gap: f64,
    },
}

impl ScheduleConfig {
    pub fn build(&self, family: &TargetFamily) -> Result<StepSchedule, ConfigError> {
        let sched = match self {
            ScheduleConfig::Uniform { t_horizon, n, delta } => {
                uniform_schedule(*t_horizon, *n, *delta)
            }
            ScheduleConfig::Proportional { t_horizon, n, delta } => {
                proportional_schedule(*t_horizon, *n, *delta)
            }
            ScheduleConfig::Theory {
                epsilon,
                beta0,
                m2,
                c_h,
            } => theory_schedule(
                *epsilon,
                *beta0,
                family.dim(),
                m2.unwrap_or_else(|| family.m2()),
                *c_h,
            ),
            ScheduleConfig::LogSigma {
                sigma_min,
                sigma_max,
                rho,
                n,
            } => log_sigma_schedule(*sigma_min, *sigma_max, *rho, *n),
            ScheduleConfig::Explicit {
                times,
                t_horizon,
                end_gap,
            } => {
                let s = StepSchedule {
                    times: times.clone(),
                    horizon: *t_horizon,
                    end_gap: *end_gap,
                };
                s.validate().map(|()| s)
            }
        };
        sched.map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    MomentGap,
    SlicedW2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LocalErrorMethod {
    #[default]
    Analytic,
    MonteCarlo,
}

/// Parameters of a `local-error` sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalErrorConfig {
    pub t_horizon: f64,
    pub t_left: f64,
    pub hs: Vec<f64>,
    #[serde(default)]
    pub method: LocalErrorMethod,
    /// Start points averaged over (analytic method).
    #[serde(default = "default_n_start")]
    pub n_start_points: usize,
    /// Monte Carlo samples per h (monte_carlo method).
    #[serde(default = "default_n_mc")]
    pub n_samples: usize,
}

fn default_n_start() -> usize {
    32
}
fn default_n_mc() -> usize {
    2000
}

/// Parameters of a `convergence` study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvergenceConfig {
    /// Coupled SDE race on the two-point-mass target.
    TwoPointRace {
        t_horizon: f64,
        delta: f64,
        nfes: Vec<usize>,
        #[serde(default = "default_fine")]
        n_fine: usize,
        #[serde(default = "default_blocks")]
        n_blocks: usize,
        #[serde(default = "default_proj")]
        n_proj: usize,
        #[serde(default = "default_replicates")]
        replicates: usize,
    },
    /// Probability-flow ODE race on the process's σ-grid.
    OdeRace {
        sigma_min: f64,
        sigma_max: f64,
        #[serde(default = "one")]
        rho: f64,
        steps: Vec<usize>,
        samplers: Vec<SamplerName>,
        #[serde(default = "default_reference")]
        n_reference: usize,
        #[serde(default = "default_proj")]
        n_proj: usize,
        #[serde(default = "default_replicates")]
        replicates: usize,
    },
}

fn default_fine() -> usize {
    256
}
fn default_blocks() -> usize {
    8
}
fn default_proj() -> usize {
    64
}
fn default_replicates() -> usize {
    3
}
fn default_reference() -> usize {
    100_000
}

/// Inputs of `plotdata`: either re-plot prior convergence CSVs or run the
/// config's convergence study first.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlotdataConfig {
    #[serde(default)]
    pub input_csv: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<inline>".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<inline>".into(),
            message: e.to_string(),
        })
    }

    /// Load by extension: `.json` is JSON, anything else parses as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        parsed.map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Build and validate the target family.
    pub fn family(&self) -> Result<TargetFamily, ConfigError> {
        let family = self
            .target
            .build()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        family
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.family()?;
        self.sampler.build()?;
        if self.chains == 0 {
            return Err(ConfigError::Invalid("chains must be positive".into()));
        }
        Ok(())
    }

    /// Hex digest of the canonical JSON form; embedded in output headers.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_TOML: &str = r#"
        seed = 7
        chains = 500
        metrics = ["moment_gap"]

        [target]
        variant = "gaussian"
        dim = 4

        [sampler]
        kind = "rmd"

        [schedule]
        generator = "theory"
        epsilon = 0.1
    "#;

    #[test]
    fn toml_round_trip_and_build() {
        let cfg = ExperimentConfig::from_toml(SAMPLE_TOML).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.chains, 500);
        let family = cfg.family().unwrap();
        let sched = cfg.schedule.as_ref().unwrap().build(&family).unwrap();
        assert!(sched.n_steps() > 10);
        assert_eq!(cfg.sampler.build().unwrap(), SamplerKind::Rmd);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = SAMPLE_TOML.replace("chains = 500", "chains = 500\nchians = 2");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(ConfigError::Parse { .. })
        ));
        let bad_nested = SAMPLE_TOML.replace("kind = \"rmd\"", "kind = \"rmd\"\nbogus = 1");
        assert!(ExperimentConfig::from_toml(&bad_nested).is_err());
    }

    #[test]
    fn json_alternative_parses() {
        let cfg = ExperimentConfig::from_toml(SAMPLE_TOML).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::from_toml(SAMPLE_TOML).unwrap();
        let mut b = a.clone();
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn process_config_builds_edm_ode() {
        let toml = r#"
            seed = 1
            [target]
            variant = "gaussian"
            dim = 2
            [process]
            ode = true
            [process.kind]
            name = "edm"
            sigma_min = 0.02
            sigma_max = 10.0
            [sampler]
            kind = "heun_ode"
        "#;
        let cfg = ExperimentConfig::from_toml(toml).unwrap();
        let family = cfg.family().unwrap();
        let spec = cfg.process.build(&family, 10.0);
        assert!(spec.ode);
        assert_eq!(
            spec.kind,
            ProcessKind::Edm {
                sigma_min: 0.02,
                sigma_max: 10.0
            }
        );
    }

    #[test]
    fn truncated_sampler_requires_exponent() {
        let cfg = ExperimentConfig::from_toml(
            &SAMPLE_TOML.replace("kind = \"rmd\"", "kind = \"rmd_truncated\""),
        )
        .unwrap();
        assert!(cfg.sampler.build().is_err());
    }
}
