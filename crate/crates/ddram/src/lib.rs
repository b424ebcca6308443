//! Randomized-midpoint diffusion samplers over analytic target distributions.
//!
//! The crate provides closed-form target families (Gaussians, isotropic
//! mixtures, point masses) whose noised marginals and scores are exact, a set
//! of reverse-time samplers (exponential Euler, exponential midpoint,
//! randomized midpoint, and deterministic ODE integrators) over several
//! forward processes, and the measurement machinery — exact one-step oracles,
//! coupled convergence drivers, and distribution metrics — needed to compare
//! them without Monte Carlo reference error.

pub mod config;
pub mod coupled;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod numeric;
pub mod process;
pub mod report;
pub mod rngstream;
pub mod runner;
pub mod sampler;
pub mod schedule;
pub mod target;
