//! Sign-based stochastic optimization with an unbiased stochastic sign operator.
//!
//! The crate covers the operator itself ([`sign`]), an online learner over
//! boxes ([`online`]), online-to-nonconvex drivers ([`nonconvex`]), a family of
//! practical optimizers and their sign conversions ([`optim`]), and an
//! experiment harness that writes per-seed and aggregate CSVs ([`harness`]).
//!
//! The `examples/` directory has one runnable program per capability:
//!
//! - `sign_operator`: empirical law of the stochastic sign
//! - `convex_counterexample`: SignSGD stalls where the stochastic version converges
//! - `online_regret`: regret growth against a random-sign adversary
//! - `nonconvex_exponential`: exponential random scaling with block surrogates
//! - `goldstein_uniform`: uniform random scaling and the radius check
//! - `sign_conversion`: ablation over the optimizer family
//! - `experiment_config`: running a TOML experiment end to end

pub mod error;
pub mod geometry;
pub mod harness;
pub mod math;
pub mod nonconvex;
pub mod online;
pub mod optim;
pub mod problems;
pub mod record;
pub mod sign;

pub use error::{Error, Result};
pub use geometry::{inf_diameter, project_weighted, BoxDomain};
pub use math::{DenseVector, FixedNoise, NoiseSource, Recorder, Replay, RngStream};
pub use nonconvex::{
    goldstein_surrogate, run_exponential, run_uniform, schedule_exponential, schedule_uniform,
    stationarity_surrogate_l1inf, ScheduleParams,
};
pub use online::{eta, online_step, run_online, OnlineConfig, OnlineState, StepSchedule};
pub use optim::{trick_matrix, Hyper, LrSchedule, OptimizerKind, PracticalState};
pub use problems::{fig1_objective, toy_nonconvex, Objective, StochasticOracle};
pub use record::{emit_plotdata, RunRecord};
pub use sign::{det_sign, sign_law, snr_metrics, stochastic_sign, SignVector};
