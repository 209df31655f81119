//! Observation-driven Poisson count processes (INGARCH-type models).
//!
//! The model is `N_t | past ~ Poisson(λ_t)` with `λ_t = f(λ_{t−1}, N_{t−1})` for a
//! contractive `f`. This crate simulates the chain, couples pairs of chains to measure
//! mixing, reconstructs intensities from past counts, fits parametric families by
//! conditional maximum likelihood, and runs the dispersion-based specification test
//! together with Monte Carlo studies of its behavior.
//!
//! Model, simulation, coupling and reconstruction code is generic over [`Real`]
//! (`f32` or `f64`); estimation, testing and the studies work in `f64`. The aliases
//! below name the concrete instantiations.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod optim;
pub mod reconstruct;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod spectest;
pub mod stats;

pub use coupling::{
    beta_bound, coalescence_experiment, couple_chains, couple_poisson, past_recovery_check,
    Coalescence, RecoveryReport,
};
pub use error::{Error, Result};
pub use estimate::{
    filtered_intensities, fit_cmle, neg_log_likelihood, EstimationResult, FitOptions,
};
pub use model::{Family, FamilyKind, IntensitySpec, ValidationReport};
pub use montecarlo::{run_study, MCSummary, StudyConfig};
pub use reconstruct::{fd_reconstruct, reconstruction_sweep, ReconstructionResult, SweepRow};
pub use rng::UniformStream;
pub use scalar::Real;
pub use simulate::{poisson_quantile, simulate, step, Trajectory};
pub use spectest::{
    oracle_test, run_test, t_stat, variance_estimate, Hypothesis, TestMode, TestReport,
};
pub use stats::normal_quantile;

pub type IntensitySpecF64 = model::IntensitySpec<f64>;
pub type IntensitySpecF32 = model::IntensitySpec<f32>;
pub type TrajectoryF64 = simulate::Trajectory<f64>;
pub type TrajectoryF32 = simulate::Trajectory<f32>;
pub type CoupledPathF64 = coupling::CoupledPath<f64>;
pub type CoupledPathF32 = coupling::CoupledPath<f32>;
pub type ReconstructionF64 = reconstruct::ReconstructionResult<f64>;
pub type ReconstructionF32 = reconstruct::ReconstructionResult<f32>;
