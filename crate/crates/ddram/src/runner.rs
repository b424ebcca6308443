//! Command implementations behind the `ddram` binary.
//!
//! Each command consumes an `ExperimentConfig` and writes its artifacts into
//! an output directory. Errors split into configuration problems (CLI exit
//! code 2) and runtime failures (exit code 3).

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{
    ConfigError, ConvergenceConfig, ExperimentConfig, LocalErrorMethod, MetricChoice,
};
use crate::coupled::{ode_race, two_point_race, RaceResult};
use crate::metrics::{fit_order, moment_gap, sliced_w2};
use crate::noise::{correlated_pair, sample_tau};
use crate::numeric::em1;
use crate::oracle::{averaged_local_errors, local_errors_mc, ErrorRow};
use crate::process::{LambdaChoice, ProcessKind, ProcessSpec};
use crate::report::{line_chart_svg, read_csv, write_csv, write_json, write_samples, Series};
use crate::rngstream::stream;
use crate::sampler::{
    run_chain, step_rmd, step_rmd_general, ChainOptions, SamplerKind,
};
use crate::target::{ScoreField, TargetFamily};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    /// Configuration or validation problem → exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Execution failure → exit code 3.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl RunnerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for RunnerError {
    fn from(e: ConfigError) -> Self {
        RunnerError::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> RunnerError {
    RunnerError::Runtime(e.to_string())
}

/// Build the global worker pool, capped by `DDRAM_THREADS` when set.
/// Safe to call once per process; later calls are no-ops.
pub fn init_thread_pool() {
    if let Ok(n) = std::env::var("DDRAM_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn ensure_dir(out: &Path) -> Result<(), RunnerError> {
    std::fs::create_dir_all(out)
        .map_err(|e| RunnerError::Runtime(format!("cannot create {}: {e}", out.display())))
}

/// Run the configured chains and write `samples.bin` + `metrics.csv`.
pub fn cmd_sample(cfg: &ExperimentConfig, out: &Path) -> Result<(), RunnerError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let family = cfg.family()?;
    let score = ScoreField::exact(family.clone());
    let kind = cfg.sampler.build()?;
    let schedule = cfg
        .schedule
        .as_ref()
        .ok_or_else(|| RunnerError::Config("sample requires a [schedule] section".into()))?
        .build(&family)?;
    let t_start = if kind.uses_process_axis() {
        schedule.times[0]
    } else {
        schedule.horizon
    };
    let spec = cfg.process.build(&family, t_start);
    let opts = ChainOptions::default();

    let endpoints: Vec<DVector<f64>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(kind, &spec, &score, &schedule, cfg.seed, c as u64, &opts).map(|r| r.x))
        .collect::<Result<_, _>>()
        .map_err(runtime)?;
    write_samples(&out.join("samples.bin"), &endpoints).map_err(runtime)?;

    // The endpoint approximates the noised target at the early-stopping gap
    // (algorithmic-time kinds) or at the final grid level (process-axis).
    let t_ref = if kind.uses_process_axis() {
        0.0
    } else {
        schedule.end_gap
    };
    let law = family.marginal(t_ref).map_err(runtime)?;
    let metrics = if cfg.metrics.is_empty() {
        vec![MetricChoice::MomentGap]
    } else {
        cfg.metrics.clone()
    };
    let mut rows = Vec::new();
    for m in metrics {
        match m {
            MetricChoice::MomentGap => {
                let (mg, cg) = moment_gap(&endpoints, &law);
                rows.push(vec!["mean_gap".into(), format!("{mg:.17e}")]);
                rows.push(vec!["cov_gap".into(), format!("{cg:.17e}")]);
            }
            MetricChoice::SlicedW2 => {
                let mut rng = stream(cfg.seed, 1, "sample-ref");
                let n_ref = cfg.chains.max(1000);
                let reference: Vec<DVector<f64>> = (0..n_ref)
                    .map(|_| family.forward_sample(t_ref, &mut rng))
                    .collect::<Result<_, _>>()
                    .map_err(runtime)?;
                let w = sliced_w2(&endpoints, &reference, 128, cfg.seed).map_err(runtime)?;
                rows.push(vec!["sliced_w2".into(), format!("{w:.17e}")]);
            }
        }
    }
    write_csv(&out.join("metrics.csv"), &cfg.hash(), &["metric", "value"], &rows)
        .map_err(runtime)?;
    Ok(())
}

/// Local-error sweep → `local_error.csv` (one row per (h, metric)) and
/// `local_error.json` with the fitted orders.
pub fn cmd_local_error(cfg: &ExperimentConfig, out: &Path) -> Result<(), RunnerError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let le = cfg
        .local_error
        .as_ref()
        .ok_or_else(|| RunnerError::Config("local-error requires a [local_error] section".into()))?;
    if le.hs.is_empty() {
        return Err(RunnerError::Config("local_error.hs must be non-empty".into()));
    }
    let family = cfg.family()?;
    let kind = cfg.sampler.build()?;

    let mut error_rows: Vec<ErrorRow> = Vec::new();
    match le.method {
        LocalErrorMethod::Analytic => {
            for &h in &le.hs {
                let (weak, strong) = averaged_local_errors(
                    kind,
                    &family,
                    le.t_horizon,
                    le.t_left,
                    h,
                    le.n_start_points,
                    cfg.seed,
                )
                .map_err(|e| match e {
                    crate::oracle::OracleError::NonGaussian
                    | crate::oracle::OracleError::Unsupported(_)
                    | crate::oracle::OracleError::BadSegment(_) => {
                        RunnerError::Config(e.to_string())
                    }
                    other => runtime(other),
                })?;
                error_rows.push(ErrorRow {
                    h,
                    weak,
                    strong,
                    weak_se: None,
                    strong_se: None,
                });
            }
        }
        LocalErrorMethod::MonteCarlo => {
            let mut rng = stream(cfg.seed, 0, "oracle-start");
            let x = family
                .forward_sample(le.t_horizon - le.t_left, &mut rng)
                .map_err(runtime)?;
            for &h in &le.hs {
                let mc = local_errors_mc(
                    kind,
                    &family,
                    le.t_horizon,
                    &x,
                    le.t_left,
                    h,
                    le.n_samples,
                    cfg.seed,
                )
                .map_err(|e| match e {
                    crate::oracle::OracleError::TooFewSamples(_)
                    | crate::oracle::OracleError::Unsupported(_)
                    | crate::oracle::OracleError::BadSegment(_) => {
                        RunnerError::Config(e.to_string())
                    }
                    other => runtime(other),
                })?;
                error_rows.push(ErrorRow {
                    h,
                    weak: mc.weak,
                    strong: mc.strong,
                    weak_se: Some(mc.weak_se),
                    strong_se: Some(mc.strong_se),
                });
            }
        }
    }

    let method = match le.method {
        LocalErrorMethod::Analytic => "analytic",
        LocalErrorMethod::MonteCarlo => "monte_carlo",
    };
    let mut rows = Vec::new();
    for r in &error_rows {
        for (name, v, se) in [("weak", r.weak, r.weak_se), ("strong", r.strong, r.strong_se)] {
            rows.push(vec![
                format!("{kind:?}"),
                format!("{}", le.t_left),
                format!("{:.17e}", r.h),
                name.into(),
                format!("{v:.17e}"),
                se.map_or(String::new(), |s| format!("{s:.17e}")),
                method.into(),
            ]);
        }
    }
    write_csv(
        &out.join("local_error.csv"),
        &cfg.hash(),
        &["sampler", "t_left", "h", "metric", "value", "se", "method"],
        &rows,
    )
    .map_err(runtime)?;

    if le.hs.len() >= 3 {
        let weaks: Vec<f64> = error_rows.iter().map(|r| r.weak).collect();
        let strongs: Vec<f64> = error_rows.iter().map(|r| r.strong).collect();
        let report = crate::oracle::ErrorReport {
            sampler: format!("{kind:?}"),
            t_left: le.t_left,
            method: method.into(),
            weak_fit: fit_order(&le.hs, &weaks).map_err(runtime)?,
            strong_fit: fit_order(&le.hs, &strongs).map_err(runtime)?,
            rows: error_rows,
        };
        write_json(&out.join("local_error.json"), &cfg.hash(), &report).map_err(runtime)?;
    }
    Ok(())
}

/// Run the configured convergence study, returning one result per replicate.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<RaceResult>, RunnerError> {
    let conv = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| RunnerError::Config("convergence requires a [convergence] section".into()))?;
    let family = cfg.family()?;
    match conv {
        ConvergenceConfig::TwoPointRace {
            t_horizon,
            delta,
            nfes,
            n_fine,
            n_blocks,
            n_proj,
            replicates,
        } => {
            let TargetFamily::TwoPoint { scale, dim } = family else {
                return Err(RunnerError::Config(
                    "two_point_race requires a two_point target".into(),
                ));
            };
            (0..*replicates)
                .map(|i| {
                    two_point_race(
                        scale,
                        dim,
                        *t_horizon,
                        *delta,
                        nfes,
                        cfg.chains,
                        *n_fine,
                        *n_blocks,
                        *n_proj,
                        cfg.seed + i as u64,
                    )
                    .map_err(|e| match e {
                        crate::coupled::CoupledError::BadParams(_) => {
                            RunnerError::Config(e.to_string())
                        }
                        other => runtime(other),
                    })
                })
                .collect()
        }
        ConvergenceConfig::OdeRace {
            sigma_min,
            sigma_max,
            rho,
            steps,
            samplers,
            n_reference,
            n_proj,
            replicates,
        } => {
            let spec = cfg.process.build(&family, *sigma_max);
            let kinds: Vec<SamplerKind> = samplers
                .iter()
                .map(|s| {
                    crate::config::SamplerConfig {
                        kind: *s,
                        truncation_r: cfg.sampler.truncation_r,
                        eed_convention: cfg.sampler.eed_convention,
                    }
                    .build()
                })
                .collect::<Result<_, _>>()?;
            (0..*replicates)
                .map(|i| {
                    ode_race(
                        &family,
                        &spec,
                        &kinds,
                        steps,
                        *sigma_min,
                        *sigma_max,
                        *rho,
                        cfg.chains,
                        *n_reference,
                        *n_proj,
                        cfg.seed + i as u64,
                    )
                    .map_err(runtime)
                })
                .collect()
        }
    }
}

fn convergence_rows(results: &[RaceResult]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for res in results {
        for c in &res.cells {
            let se = if c.block_metrics.len() >= 2 {
                let b = c.block_metrics.len() as f64;
                let m = c.block_metrics.iter().sum::<f64>() / b;
                let var = c
                    .block_metrics
                    .iter()
                    .map(|v| (v - m) * (v - m))
                    .sum::<f64>()
                    / (b - 1.0);
                format!("{:.17e}", (var / b).sqrt())
            } else {
                String::new()
            };
            rows.push(vec![
                res.seed.to_string(),
                c.sampler.clone(),
                c.n_steps.to_string(),
                c.nfe.to_string(),
                format!("{:.17e}", c.metric),
                se,
            ]);
        }
    }
    rows
}

const CONVERGENCE_COLUMNS: [&str; 6] =
    ["replicate_seed", "sampler", "n_steps", "nfe", "metric", "block_se"];

/// Convergence study → `convergence.csv` + `convergence.json`.
pub fn cmd_convergence(cfg: &ExperimentConfig, out: &Path) -> Result<(), RunnerError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let results = run_convergence(cfg)?;
    write_csv(
        &out.join("convergence.csv"),
        &cfg.hash(),
        &CONVERGENCE_COLUMNS,
        &convergence_rows(&results),
    )
    .map_err(runtime)?;
    write_json(&out.join("convergence.json"), &cfg.hash(), &results).map_err(runtime)?;
    Ok(())
}

struct Check {
    name: &'static str,
    pass: bool,
    stat: String,
}

/// Validation battery over the stochastic kernels and reduction identities.
/// Prints one PASS/FAIL line per check, writes `validate.csv`, and fails
/// (exit 3) if any check fails.
pub fn cmd_validate(cfg: &ExperimentConfig, out: &Path) -> Result<(), RunnerError> {
    ensure_dir(out)?;
    let seed = cfg.seed;
    let mut checks = Vec::new();

    // Midpoint-time law: KS distance against the analytic CDF.
    for &h in &[0.05, 0.5, 1.0] {
        let n = 1_000_000usize;
        let mut rng = stream(seed, 0, "validate-tau");
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_tau(h, &mut rng))
            .collect::<Result<_, _>>()
            .map_err(runtime)?;
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |t: f64| (((t - h).exp() - (-h).exp()) / em1(h)).clamp(0.0, 1.0);
        let mut ks: f64 = 0.0;
        for (i, &t) in draws.iter().enumerate() {
            let f = cdf(t);
            ks = ks
                .max((f - i as f64 / n as f64).abs())
                .max(((i + 1) as f64 / n as f64 - f).abs());
        }
        checks.push(Check {
            name: match h {
                x if x == 0.05 => "tau_density_ks_h_0.05",
                x if x == 0.5 => "tau_density_ks_h_0.5",
                _ => "tau_density_ks_h_1.0",
            },
            pass: ks < 0.005,
            stat: format!("ks = {ks:.5}"),
        });
    }

    // Noise covariance lemma at (τ, h) = (0.3, 0.5).
    {
        let (tau, h) = (0.3, 0.5);
        let n = 1_000_000usize;
        let mut rng = stream(seed, 1, "validate-cov");
        let (mut vp, mut cv, mut vf) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let pair = correlated_pair(tau, h, 1, &mut rng).map_err(runtime)?;
            vp += pair.xi_plus[0] * pair.xi_plus[0];
            vf += pair.xi[0] * pair.xi[0];
            cv += pair.xi_plus[0] * pair.xi[0];
        }
        let nf = n as f64;
        let dev = (vp / nf - em1(2.0 * tau))
            .abs()
            .max((vf / nf - em1(2.0 * h)).abs())
            .max((cv / nf - ((tau - h).exp() - (-(tau + h)).exp())).abs());
        checks.push(Check {
            name: "noise_covariance_lemma",
            pass: dev < 5e-3,
            stat: format!("max moment deviation = {dev:.2e}"),
        });
    }

    // Ω⁻¹ ∘ Ω identity on the named process specs.
    {
        let cases: Vec<(ProcessSpec, f64, f64)> = vec![
            (ProcessSpec::named(ProcessKind::Ou), 1.5, 0.4),
            (
                ProcessSpec::named(ProcessKind::Vp {
                    beta_min: 0.1,
                    beta_max: 20.0,
                }),
                0.9,
                0.3,
            ),
            (
                ProcessSpec::named(ProcessKind::Ve {
                    sigma_min: 0.02,
                    sigma_max: 10.0,
                }),
                50.0,
                10.0,
            ),
            (
                ProcessSpec::named(ProcessKind::Edm {
                    sigma_min: 0.02,
                    sigma_max: 10.0,
                }),
                8.0,
                1.0,
            ),
        ];
        let mut max_dev: f64 = 0.0;
        for (spec, t0, t1) in &cases {
            let factors = spec.factors(*t0);
            // Interior probes only: at the endpoints the bracketing root
            // finder has no sign change to work with.
            for k in 1..8 {
                let t = t0 + (t1 - t0) * k as f64 / 8.0;
                let y = factors.omega_int(t).map_err(runtime)?;
                let back = factors.invert_omega_int(y, *t1).map_err(runtime)?;
                max_dev = max_dev.max((back - t).abs());
            }
        }
        checks.push(Check {
            name: "factor_inversion_identity",
            pass: max_dev < 1e-10,
            stat: format!("max |Ω⁻¹(Ω(t)) − t| = {max_dev:.2e}"),
        });
    }

    // Reduction identities on shared randomness.
    {
        let fam = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
        let score = ScoreField::exact(fam);
        let spec = ProcessSpec::named(ProcessKind::Ou);
        let t_horizon = 3.0;
        let mut rng = stream(seed, 2, "validate-reduction");
        let mut max_dev: f64 = 0.0;
        for _ in 0..10_000 {
            let t_left = 0.1 + 2.0 * rng.gen::<f64>();
            let h = 0.01 + 0.5 * rng.gen::<f64>();
            let x = crate::noise::gaussian_vector(2, &mut rng);
            let u: f64 = rng.gen();
            let z1 = crate::noise::gaussian_vector(2, &mut rng);
            let z2 = crate::noise::gaussian_vector(2, &mut rng);
            let direct =
                step_rmd(&score, t_horizon, &x, t_left, h, u, &z1, &z2, None).map_err(runtime)?;
            let t0 = t_horizon - t_left;
            let factors = spec.factors(t0);
            let mut f =
                |t: f64, y: &DVector<f64>| Ok(spec.residual_drift(&score, t, y)?);
            let general =
                step_rmd_general(&factors, t0 - h, &mut f, &x, u, &z1, &z2).map_err(runtime)?;
            max_dev = max_dev.max((direct - general).norm());
        }
        checks.push(Check {
            name: "rmd_general_reduces_to_rmd_on_ou",
            pass: max_dev < 1e-10,
            stat: format!("max deviation = {max_dev:.2e}"),
        });

        let spec0 = ProcessSpec::named(ProcessKind::Ou).with_lambda(LambdaChoice::Zero);
        let fam = TargetFamily::TwoPoint { scale: 1.0, dim: 2 };
        let score = ScoreField::exact(fam);
        let mut max_dev: f64 = 0.0;
        for _ in 0..10_000 {
            let t0 = 0.4 + 2.0 * rng.gen::<f64>();
            let h = 0.01 + 0.2 * rng.gen::<f64>();
            let t1 = t0 - h;
            let x = crate::noise::gaussian_vector(2, &mut rng);
            let u: f64 = rng.gen();
            let z1 = crate::noise::gaussian_vector(2, &mut rng);
            let z2 = crate::noise::gaussian_vector(2, &mut rng);
            let factors = spec0.factors(t0);
            let mut f =
                |t: f64, y: &DVector<f64>| Ok(spec0.residual_drift(&score, t, y)?);
            let general =
                step_rmd_general(&factors, t1, &mut f, &x, u, &z1, &z2).map_err(runtime)?;
            // Randomized midpoint Euler by hand (ω ≡ 1, OU g² = 2).
            let tau = (1.0 - u) * (t1 - t0);
            let xi_plus = &z1 * (2.0 * tau.abs()).sqrt();
            let x_mid =
                &x + spec0.residual_drift(&score, t0, &x).map_err(runtime)? * tau + &xi_plus;
            let xi = &xi_plus + &z2 * (2.0 * (h - tau.abs())).sqrt();
            let expected = &x
                + spec0
                    .residual_drift(&score, t0 + tau, &x_mid)
                    .map_err(runtime)?
                    * (t1 - t0)
                + xi;
            max_dev = max_dev.max((general - expected).norm());
        }
        checks.push(Check {
            name: "rmd_general_reduces_to_randomized_euler_at_lambda_zero",
            pass: max_dev < 1e-10,
            stat: format!("max deviation = {max_dev:.2e}"),
        });
    }

    let mut rows = Vec::new();
    let mut all_pass = true;
    for c in &checks {
        println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.stat);
        all_pass &= c.pass;
        rows.push(vec![
            c.name.to_string(),
            if c.pass { "pass" } else { "fail" }.into(),
            c.stat.clone(),
        ]);
    }
    write_csv(
        &out.join("validate.csv"),
        &cfg.hash(),
        &["check", "result", "statistic"],
        &rows,
    )
    .map_err(runtime)?;
    if all_pass {
        Ok(())
    } else {
        Err(RunnerError::Runtime("validation checks failed".into()))
    }
}

/// Long-form plot data + an SVG line chart, from prior convergence CSVs or by
/// running the configured study.
pub fn cmd_plotdata(cfg: &ExperimentConfig, out: &Path) -> Result<(), RunnerError> {
    ensure_dir(out)?;
    let input = cfg.plotdata.as_ref().and_then(|p| p.input_csv.clone());
    let rows: Vec<Vec<String>> = match input {
        Some(path) => {
            let (cols, rows) = read_csv(&PathBuf::from(&path)).map_err(runtime)?;
            if cols != CONVERGENCE_COLUMNS {
                return Err(RunnerError::Config(format!(
                    "{path}: expected convergence CSV columns {CONVERGENCE_COLUMNS:?}, got {cols:?}"
                )));
            }
            rows
        }
        None => convergence_rows(&run_convergence(cfg)?),
    };

    // Long form: series = sampler@replicate, x = NFE, y = metric.
    let mut long = Vec::new();
    for r in &rows {
        long.push(vec![
            format!("{}@{}", r[1], r[0]),
            r[3].clone(),
            r[4].clone(),
        ]);
    }
    write_csv(
        &out.join("plotdata.csv"),
        &cfg.hash(),
        &["series", "nfe", "metric"],
        &long,
    )
    .map_err(runtime)?;

    // One chart: replicate-averaged metric per sampler against NFE.
    let mut samplers: Vec<String> = rows.iter().map(|r| r[1].clone()).collect();
    samplers.sort();
    samplers.dedup();
    let mut series = Vec::new();
    for s in &samplers {
        let mut by_nfe: Vec<(usize, f64, usize)> = Vec::new();
        for r in rows.iter().filter(|r| &r[1] == s) {
            let nfe: usize = r[3].parse().map_err(|_| runtime("bad nfe column"))?;
            let v: f64 = r[4].parse().map_err(|_| runtime("bad metric column"))?;
            match by_nfe.iter_mut().find(|(n, _, _)| *n == nfe) {
                Some((_, acc, cnt)) => {
                    *acc += v;
                    *cnt += 1;
                }
                None => by_nfe.push((nfe, v, 1)),
            }
        }
        by_nfe.sort_by_key(|(n, _, _)| *n);
        series.push(Series {
            name: s.clone(),
            points: by_nfe
                .into_iter()
                .map(|(n, acc, cnt)| (n as f64, acc / cnt as f64))
                .collect(),
        });
    }
    let svg = line_chart_svg("sampler convergence", "NFE", "sliced W2", &series, true);
    std::fs::write(out.join("convergence.svg"), svg).map_err(|e| runtime(e))?;
    Ok(())
}
