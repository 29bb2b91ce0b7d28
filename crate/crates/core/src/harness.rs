//! Experiment configs, multi-seed execution and artifact emission.
//!
//! A config is a TOML file with an `[experiment]` section naming the kind,
//! seeds and output directory, plus one optional section per kind:
//!
//! ```toml
//! [experiment]
//! kind = "online-regret"
//! seeds = [1, 2, 3]
//! out = "out/regret"
//!
//! [online-regret]
//! dim = 4
//! horizons = [256, 1024]
//! ```
//!
//! Each seed runs on its own thread with its own random streams. The run
//! writes `seed_<n>.csv`, `aggregate.csv`, `summary.csv` and `plotdata.csv`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxDomain;
use crate::math::{DenseVector, FixedNoise, NoiseSource, RngStream};
use crate::nonconvex::{
    run_exponential, run_uniform, schedule_exponential_with, schedule_uniform_with, ExpConstants, NonconvexOptions,
    Scaling, ScheduleParams, UniformConstants, GUARDRAIL_CAP,
};
use crate::online::{run_online, OnlineConfig, StepSchedule};
use crate::optim::{trick_matrix, train, Hyper, LrSchedule, OptimizerKind, PracticalState, TrainConfig};
use crate::problems::{
    exhaustive_expected_max_regret, fig1_objective, fig1_signsgd_extended, Fig1SignTrace, objective_by_id, rademacher_adversary, sampled_max_regret,
    NoiseModel, Objective, StochasticOracle,
};
use crate::record::{aggregate, emit_plotdata, fmt_f64, stats, write_aggregate_csv, write_plotdata_csv, AggregateRow, RunRecord};
use crate::sign::{sign_law, stochastic_sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifySign,
    ConvexDemo,
    OnlineRegret,
    Nonconvex,
    Ablate,
    AdversaryBruteforce,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::VerifySign => "verify-sign",
            ExperimentKind::ConvexDemo => "convex-demo",
            ExperimentKind::OnlineRegret => "online-regret",
            ExperimentKind::Nonconvex => "nonconvex",
            ExperimentKind::Ablate => "ablate",
            ExperimentKind::AdversaryBruteforce => "adversary-bruteforce",
        }
    }

    /// Column plotted by default.
    fn plot_metric(self) -> &'static str {
        match self {
            ExperimentKind::VerifySign => "max_mean_err",
            ExperimentKind::ConvexDemo | ExperimentKind::Nonconvex | ExperimentKind::Ablate => "loss",
            ExperimentKind::OnlineRegret => "regret_max_cum",
            ExperimentKind::AdversaryBruteforce => "mc_mean",
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub override_guardrail: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySignConfig {
    pub instances: usize,
    pub dim: usize,
    pub draws: u64,
    pub exp_draws: u64,
    /// Mean tolerance; `4 / sqrt(draws)` when absent.
    pub mean_tol: Option<f64>,
    pub law_tol: f64,
    pub var_tol: f64,
    /// Total-variance tolerance per dimension.
    pub total_var_tol: f64,
    pub exp_mean_tol: f64,
    pub exp_second_tol: f64,
}

impl Default for VerifySignConfig {
    fn default() -> Self {
        VerifySignConfig {
            instances: 20,
            dim: 5,
            draws: 100_000,
            exp_draws: 1_000_000,
            mean_tol: None,
            law_tol: 0.013,
            var_tol: 0.02,
            total_var_tol: 0.05,
            exp_mean_tol: 0.01,
            exp_second_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvexDemoConfig {
    pub horizon: usize,
    pub x0: Vec<f64>,
    /// Multiplier on `√2 D∞ ‖L‖₁ / √T` for the median averaged-iterate check.
    pub slack: f64,
    /// Tolerance on the conservation of `x₁ + x₂` under SignSGD.
    pub conservation_tol: f64,
}

impl Default for ConvexDemoConfig {
    fn default() -> Self {
        ConvexDemoConfig {
            horizon: 10_000,
            x0: vec![0.8, 0.2],
            slack: 2.0,
            conservation_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineRegretConfig {
    /// Loss source; only `rademacher` is linear and tracks max-regret.
    pub problem: String,
    pub dim: usize,
    /// `L_i` for every coordinate.
    pub bound: f64,
    /// Box `[-radius, radius]^d`.
    pub radius: f64,
    pub horizons: Vec<usize>,
    /// `anytime` or `fixed`.
    pub schedule: String,
    pub record_iterates: bool,
}

impl Default for OnlineRegretConfig {
    fn default() -> Self {
        OnlineRegretConfig {
            problem: "rademacher".into(),
            dim: 4,
            bound: 1.0,
            radius: 1.0,
            horizons: vec![256, 1024, 4096],
            schedule: "anytime".into(),
            record_iterates: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonconvexConfig {
    /// `exp` or `uniform`.
    pub variant: String,
    pub problem: String,
    pub dim: usize,
    /// Start point; every coordinate `x0_value` when absent.
    pub x0: Option<Vec<f64>>,
    pub x0_value: f64,
    /// Amplitude of bounded uniform gradient noise.
    pub noise: f64,
    /// `theorem`, `proof` or `relaxed`.
    pub schedule: String,
    pub delta_f: f64,
    pub delta: f64,
    pub eps: f64,
    /// `‖L‖₁`; taken from the oracle when absent.
    pub l1: Option<f64>,
    /// Relaxed mode only.
    pub k: u64,
    pub n: u64,
    /// Relaxed mode; the variant's theorem formula at the chosen `N` when absent.
    pub d_inf: Option<f64>,
    pub record_iterates: bool,
}

impl Default for NonconvexConfig {
    fn default() -> Self {
        NonconvexConfig {
            variant: "exp".into(),
            problem: "toy-nonconvex".into(),
            dim: 4,
            x0: None,
            x0_value: 2.0,
            noise: 0.1,
            schedule: "relaxed".into(),
            delta_f: 4.0,
            delta: 1.0,
            eps: 1.0,
            l1: None,
            k: 10,
            n: 50,
            d_inf: None,
            record_iterates: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub problem: String,
    pub dim: usize,
    pub x0_value: f64,
    pub noise: f64,
    pub steps: u64,
    pub lr: f64,
    /// `constant`, `inv-sqrt` or `cosine`.
    pub schedule: String,
    /// Optimizer ids; the seven of the trick table when empty.
    pub optimizers: Vec<String>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub weight_decay: f64,
    pub record_iterates: bool,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            problem: "toy-nonconvex".into(),
            dim: 8,
            x0_value: 1.5,
            noise: 0.5,
            steps: 500,
            lr: 0.01,
            schedule: "constant".into(),
            optimizers: Vec::new(),
            beta1: None,
            beta2: None,
            eps: None,
            weight_decay: 0.0,
            record_iterates: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BruteforceConfig {
    pub dim: usize,
    pub horizon: usize,
    pub bound: f64,
    pub radius: f64,
    /// Fixed learner point; the box center when absent.
    pub learner: Option<Vec<f64>>,
    pub samples: usize,
    /// Standard errors allowed between the sampled and exact values.
    pub z: f64,
}

impl Default for BruteforceConfig {
    fn default() -> Self {
        BruteforceConfig {
            dim: 1,
            horizon: 4,
            bound: 1.0,
            radius: 0.5,
            learner: None,
            samples: 20_000,
            z: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default, rename = "verify-sign")]
    pub verify_sign: VerifySignConfig,
    #[serde(default, rename = "convex-demo")]
    pub convex_demo: ConvexDemoConfig,
    #[serde(default, rename = "online-regret")]
    pub online_regret: OnlineRegretConfig,
    #[serde(default)]
    pub nonconvex: NonconvexConfig,
    #[serde(default)]
    pub ablate: AblateConfig,
    #[serde(default, rename = "adversary-bruteforce")]
    pub adversary_bruteforce: BruteforceConfig,
}

impl ExperimentConfig {
    /// Defaults for `kind` with seed 1.
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection {
                kind,
                seeds: default_seeds(),
                out: None,
                override_guardrail: false,
            },
            verify_sign: Default::default(),
            convex_demo: Default::default(),
            online_regret: Default::default(),
            nonconvex: Default::default(),
            ablate: Default::default(),
            adversary_bruteforce: Default::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind
    }

    /// Checks seeds, ids and numeric ranges for the selected kind.
    pub fn validate(&self) -> Result<()> {
        let seeds = &self.experiment.seeds;
        if seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        let guard = |horizon: u128| -> Result<()> {
            if !self.experiment.override_guardrail && horizon > u128::from(GUARDRAIL_CAP) {
                return Err(Error::Guardrail { horizon, cap: GUARDRAIL_CAP });
            }
            Ok(())
        };
        match self.kind() {
            ExperimentKind::VerifySign => {
                let c = &self.verify_sign;
                positive_count("instances", c.instances as u64)?;
                positive_count("dim", c.dim as u64)?;
                positive_count("draws", c.draws)?;
                positive_count("exp_draws", c.exp_draws)?;
            }
            ExperimentKind::ConvexDemo => {
                let c = &self.convex_demo;
                positive_count("horizon", c.horizon as u64)?;
                guard(c.horizon as u128)?;
                if c.x0.len() != 2 || !BoxDomain::cube(2, -1.0, 1.0)?.contains(&DenseVector::from_vec(c.x0.clone())) {
                    return Err(Error::Config("convex-demo x0 must be a point of [-1, 1]^2".into()));
                }
                positive("slack", c.slack)?;
            }
            ExperimentKind::OnlineRegret => {
                let c = &self.online_regret;
                if c.problem != "rademacher" {
                    return Err(Error::UnknownId {
                        kind: "online-regret problem",
                        id: c.problem.clone(),
                    });
                }
                positive_count("dim", c.dim as u64)?;
                positive("bound", c.bound)?;
                positive("radius", c.radius)?;
                if c.horizons.is_empty() || c.horizons.contains(&0) {
                    return Err(Error::Config("horizons must be a non-empty list of positive integers".into()));
                }
                for &t in &c.horizons {
                    guard(t as u128)?;
                }
                parse_online_schedule(&c.schedule, 1)?;
            }
            ExperimentKind::Nonconvex => {
                let c = &self.nonconvex;
                Scaling::parse(&c.variant)?;
                objective_by_id(&c.problem, c.dim)?;
                let params = nonconvex_params(c, &self.oracle_l1(c)?)?;
                guard(params.horizon())?;
                nonconvex_x0(c)?;
            }
            ExperimentKind::Ablate => {
                let c = &self.ablate;
                objective_by_id(&c.problem, c.dim)?;
                positive_count("steps", c.steps)?;
                guard(u128::from(c.steps))?;
                LrSchedule::parse(&c.schedule, c.lr, c.steps)?;
                for kind in ablate_optimizers(c)? {
                    ablate_hyper(c, kind).validate(kind)?;
                }
                if !(c.noise >= 0.0) {
                    return Err(Error::invalid("noise", "must be non-negative"));
                }
            }
            ExperimentKind::AdversaryBruteforce => {
                let c = &self.adversary_bruteforce;
                positive_count("dim", c.dim as u64)?;
                positive_count("horizon", c.horizon as u64)?;
                positive_count("samples", c.samples as u64)?;
                positive("bound", c.bound)?;
                positive("radius", c.radius)?;
                if let Some(l) = &c.learner {
                    if l.len() != c.dim {
                        return Err(Error::DimensionMismatch {
                            expected: c.dim,
                            found: l.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn oracle_l1(&self, c: &NonconvexConfig) -> Result<f64> {
        if let Some(l1) = c.l1 {
            return Ok(l1);
        }
        let base = objective_by_id(&c.problem, c.dim)?;
        Ok(base.lipschitz().norms().l1 + c.noise * c.dim as f64)
    }
}

fn positive_count(name: &'static str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(Error::invalid(name, "must be at least 1"));
    }
    Ok(())
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(name, format!("{v} must be positive")));
    }
    Ok(())
}

fn parse_online_schedule(name: &str, horizon: usize) -> Result<StepSchedule> {
    match name {
        "anytime" => Ok(StepSchedule::Anytime),
        "fixed" => Ok(StepSchedule::Fixed { horizon }),
        other => Err(Error::UnknownId {
            kind: "step schedule",
            id: other.to_string(),
        }),
    }
}

fn nonconvex_params(c: &NonconvexConfig, l1: &f64) -> Result<ScheduleParams> {
    let scaling = Scaling::parse(&c.variant)?;
    match (c.schedule.as_str(), scaling) {
        ("theorem", Scaling::Exponential) => schedule_exponential_with(c.delta_f, c.delta, c.eps, *l1, ExpConstants::theorem()),
        ("proof", Scaling::Exponential) => schedule_exponential_with(c.delta_f, c.delta, c.eps, *l1, ExpConstants::proof()),
        ("theorem", Scaling::Uniform) => schedule_uniform_with(c.delta_f, c.delta, c.eps, *l1, UniformConstants::theorem()),
        ("proof", Scaling::Uniform) => schedule_uniform_with(c.delta_f, c.delta, c.eps, *l1, UniformConstants::proof()),
        ("relaxed", _) => {
            positive_count("n", c.n)?;
            let d_inf = match (c.d_inf, scaling) {
                (Some(v), _) => v,
                (None, Scaling::Uniform) => c.delta / c.n as f64,
                (None, Scaling::Exponential) => c.eps.sqrt() / ((14.0 * c.delta).sqrt() * c.n as f64),
            };
            ScheduleParams::relaxed(scaling, c.k, c.n, d_inf, c.delta)
        }
        (other, _) => Err(Error::UnknownId {
            kind: "nonconvex schedule",
            id: other.to_string(),
        }),
    }
}

fn nonconvex_x0(c: &NonconvexConfig) -> Result<DenseVector> {
    match &c.x0 {
        Some(v) => {
            let x = DenseVector::try_from_vec(v.clone())?;
            x.check_len(c.dim)?;
            Ok(x)
        }
        None => Ok(DenseVector::filled(c.dim, c.x0_value)),
    }
}

fn ablate_optimizers(c: &AblateConfig) -> Result<Vec<OptimizerKind>> {
    if c.optimizers.is_empty() {
        return Ok(trick_matrix().into_iter().map(|r| r.kind).collect());
    }
    let kinds = c.optimizers.iter().map(|id| OptimizerKind::parse(id)).collect::<Result<Vec<_>>>()?;
    if kinds.iter().collect::<BTreeSet<_>>().len() != kinds.len() {
        return Err(Error::Config("optimizer ids must be distinct".into()));
    }
    Ok(kinds)
}

fn ablate_hyper(c: &AblateConfig, kind: OptimizerKind) -> Hyper {
    let d = kind.default_hyper();
    Hyper {
        beta1: c.beta1.unwrap_or(d.beta1),
        beta2: c.beta2.unwrap_or(d.beta2),
        eps: c.eps.unwrap_or(d.eps),
        weight_decay: c.weight_decay,
    }
}

/// One pass/fail assertion evaluated over all seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub records: Vec<RunRecord>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub seeds: Vec<SeedResult>,
    pub aggregate: Vec<AggregateRow>,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `0` when every check passed, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    /// Summary values of `series` across seeds, in seed order.
    pub fn summary_values(&self, series: &str, key: &str) -> Vec<f64> {
        self.seeds
            .iter()
            .flat_map(|s| s.records.iter())
            .filter(|r| r.series() == series)
            .filter_map(|r| r.summary_value(key))
            .collect()
    }
}

/// Runs every seed, evaluates checks and writes artifacts when an output
/// directory is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    // The SignSGD baseline is deterministic; compute it once for all seeds.
    let fig1 = (config.kind() == ExperimentKind::ConvexDemo).then(|| {
        let c = &config.convex_demo;
        fig1_signsgd_extended([c.x0[0], c.x0[1]], c.horizon, FIG1_DOMAIN_DIAMETER)
    });
    let seeds: Vec<SeedResult> = config
        .experiment
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed, fig1.as_ref()).map(|records| SeedResult { seed, records }))
        .collect::<Result<Vec<_>>>()?;
    for s in &seeds {
        for r in &s.records {
            r.check_finite()?;
        }
    }
    let all: Vec<RunRecord> = seeds.iter().flat_map(|s| s.records.iter().cloned()).collect();
    let aggregate_rows = aggregate(&all)?;
    let checks = evaluate_checks(config, &seeds)?;
    let mut outcome = ExperimentOutcome {
        kind: config.kind(),
        seeds,
        aggregate: aggregate_rows,
        checks,
        files: Vec::new(),
    };
    if let Some(dir) = &config.experiment.out {
        outcome.files = write_artifacts(dir, config.kind(), &outcome)?;
    }
    Ok(outcome)
}

fn run_seed(config: &ExperimentConfig, seed: u64, fig1: Option<&Fig1SignTrace>) -> Result<Vec<RunRecord>> {
    match config.kind() {
        ExperimentKind::VerifySign => verify_sign_seed(&config.verify_sign, seed),
        ExperimentKind::ConvexDemo => convex_demo_seed(&config.convex_demo, seed, fig1.expect("computed for convex-demo")),
        ExperimentKind::OnlineRegret => online_regret_seed(&config.online_regret, seed),
        ExperimentKind::Nonconvex => nonconvex_seed(config, seed),
        ExperimentKind::Ablate => ablate_seed(&config.ablate, seed),
        ExperimentKind::AdversaryBruteforce => bruteforce_seed(&config.adversary_bruteforce, seed),
    }
}

/// `D∞` of the box `[-1, 1]²`.
const FIG1_DOMAIN_DIAMETER: f64 = 2.0;

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn verify_sign_seed(c: &VerifySignConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let mut inst_rng = RngStream::new(seed, 0);
    let mut noise = RngStream::new(seed, 1);
    let mut rec = RunRecord::new(
        "sign",
        "instance",
        strings(&["max_mean_err", "max_p_plus_err", "max_var_err", "total_var_err", "rms_ratio"]),
    );
    let n = c.draws as f64;
    for i in 0..c.instances {
        let scale: DenseVector = (0..c.dim).map(|_| 0.1 + 1.9 * inst_rng.next_f64()).collect();
        let x = scale.zip_map(&inst_rng.uniform_sym(c.dim), |g, u| g * u)?;
        let law = sign_law(&x, &scale)?;
        let mut sum = vec![0.0; c.dim];
        let mut plus = vec![0u64; c.dim];
        for _ in 0..c.draws {
            let s = stochastic_sign(&x, &scale, &mut noise)?;
            for (j, &v) in s.iter().enumerate() {
                sum[j] += f64::from(v);
                plus[j] += u64::from(v == 1);
            }
        }
        let (mut mean_err, mut p_err, mut var_err) = (0.0_f64, 0.0_f64, 0.0_f64);
        let mut total_var = 0.0;
        for j in 0..c.dim {
            let mean = sum[j] / n;
            // Signs are ±1, so E[s²] = 1 and the sample variance is 1 - mean².
            let var = 1.0 - mean * mean;
            total_var += var;
            mean_err = mean_err.max((mean - law[j].mean).abs());
            p_err = p_err.max((plus[j] as f64 / n - law[j].p_plus).abs());
            var_err = var_err.max((var - law[j].variance).abs());
        }
        let r = x.zip_map(&scale, |a, b| a / b)?;
        let rms = r.norms().rms;
        let total_expected = c.dim as f64 * (1.0 - rms * rms);
        rec.push(
            i as u64 + 1,
            vec![
                Some(mean_err),
                Some(p_err),
                Some(var_err),
                Some((total_var - total_expected).abs()),
                Some(rms),
            ],
        );
    }
    let mut exp_rng = RngStream::new(seed, 2);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..c.exp_draws {
        let s = exp_rng.exp1();
        s1 += s;
        s2 += s * s;
    }
    let m = c.exp_draws as f64;
    rec.push_summary("exp_mean", s1 / m);
    rec.push_summary("exp_second_moment", s2 / m);
    for col in ["max_mean_err", "max_p_plus_err", "max_var_err", "total_var_err"] {
        let worst = rec.column(col).unwrap().into_iter().flatten().fold(0.0, f64::max);
        rec.push_summary(format!("worst_{col}"), worst);
    }
    Ok(vec![rec])
}

fn convex_demo_seed(c: &ConvexDemoConfig, seed: u64, trace: &Fig1SignTrace) -> Result<Vec<RunRecord>> {
    let f = fig1_objective();
    let domain = BoxDomain::cube(2, -1.0, 1.0)?;
    let d_inf = domain.diameter_inf();
    let x0 = DenseVector::from_vec(c.x0.clone());

    // Stochastic sign learner with projection and the anytime step.
    let mut oracle = StochasticOracle::exact(fig1_objective());
    let mut cfg = OnlineConfig::new(c.horizon, domain.clone());
    cfg.x1 = Some(x0.clone());
    let run = run_online(&mut oracle, &cfg, &mut RngStream::new(seed, 1))?;
    let mut sto = RunRecord::new("stosignsgd", "t", strings(&["eta", "loss", "avg_loss", "sum_x", "x_0", "x_1"]));
    let mut acc = DenseVector::zeros(2);
    for row in &run.rows {
        acc = acc.add(&row.x)?;
        let avg = acc.scaled(1.0 / row.t as f64);
        sto.push(
            row.t as u64,
            vec![
                Some(row.eta),
                Some(row.loss),
                Some(f.value(&avg)),
                Some(row.x[0] + row.x[1]),
                Some(row.x[0]),
                Some(row.x[1]),
            ],
        );
    }
    sto.push_summary("final_avg_loss", f.value(&run.average));
    sto.push_summary("final_loss", f.value(&run.final_x));

    // Deterministic SignSGD, same step sizes, no projection.
    let mut sgn = RunRecord::new("signsgd", "t", strings(&["eta", "loss", "avg_loss", "sum_x", "x_0", "x_1"]));
    let mut acc = DenseVector::zeros(2);
    for (i, (x, loss)) in trace.iterates.iter().zip(&trace.losses).enumerate() {
        let t = i + 1;
        let x = DenseVector::from_vec(x.to_vec());
        acc = acc.add(&x)?;
        sgn.push(
            t as u64,
            vec![
                Some(crate::online::eta(t, d_inf, StepSchedule::Anytime)?),
                Some(*loss),
                Some(f.value(&acc.scaled(1.0 / t as f64))),
                Some(x[0] + x[1]),
                Some(x[0]),
                Some(x[1]),
            ],
        );
    }
    sgn.push_summary("max_sum_drift", trace.max_sum_drift);
    sgn.push_summary("min_loss", trace.losses.iter().cloned().fold(f64::INFINITY, f64::min));
    sgn.push_summary("min_abs_gap", trace.min_gap);
    sgn.push_summary("hit_kink", if trace.kink_step.is_some() { 1.0 } else { 0.0 });
    sgn.push_summary("final_avg_loss", f.value(&acc.scaled(1.0 / c.horizon as f64)));
    sgn.push_summary("f64_kink_step", f64_signsgd_kink_step(&x0, c.horizon, d_inf)? as f64);
    Ok(vec![sgn, sto])
}

/// First step at which plain `f64` SignSGD lands on `x₁ = x₂`, or 0.
fn f64_signsgd_kink_step(x0: &DenseVector, horizon: usize, d_inf: f64) -> Result<usize> {
    let f = fig1_objective();
    let mut state = PracticalState::new(
        OptimizerKind::SignSgd,
        x0.clone(),
        Hyper {
            beta1: 0.0,
            ..OptimizerKind::SignSgd.default_hyper()
        },
    )?;
    for t in 1..=horizon {
        if state.x[0] == state.x[1] {
            return Ok(t);
        }
        let g = f.subgradient(&state.x);
        state.step(&g, crate::online::eta(t, d_inf, StepSchedule::Anytime)?, &mut FixedNoise::zero())?;
    }
    Ok(0)
}

fn online_regret_seed(c: &OnlineRegretConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let domain = BoxDomain::cube(c.dim, -c.radius, c.radius)?;
    let bound = DenseVector::filled(c.dim, c.bound);
    let mut out = Vec::new();
    for &horizon in &c.horizons {
        let mut adversary = rademacher_adversary(&mut RngStream::new(seed, 10 + horizon as u64), horizon, c.dim, &bound)?;
        let mut cfg = OnlineConfig::new(horizon, domain.clone());
        cfg.schedule = parse_online_schedule(&c.schedule, horizon)?;
        let run = run_online(&mut adversary, &cfg, &mut RngStream::new(seed, 1_000_000 + horizon as u64))?;
        let mut rec = run.record(&format!("T={horizon}"), c.record_iterates);
        let max_regret = run.final_max_regret().expect("linear losses track max-regret");
        let envelope = (2.0 + std::f64::consts::SQRT_2) * domain.diameter_inf() * bound.norms().l1 * (horizon as f64).sqrt();
        rec.push_summary("horizon", horizon as f64);
        rec.push_summary("max_regret", max_regret);
        rec.push_summary("envelope", envelope);
        out.push(rec);
    }
    Ok(out)
}

fn nonconvex_seed(config: &ExperimentConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let c = &config.nonconvex;
    let l1 = config.oracle_l1(c)?;
    let params = nonconvex_params(c, &l1)?;
    let base = objective_by_id(&c.problem, c.dim)?;
    let noise_model = if c.noise > 0.0 {
        NoiseModel::BoundedUniform(DenseVector::filled(c.dim, c.noise))
    } else {
        NoiseModel::None
    };
    let mut oracle = StochasticOracle::new(base, noise_model, RngStream::new(seed, 2))?;
    let x0 = nonconvex_x0(c)?;
    let opts = NonconvexOptions {
        record_iterates: c.record_iterates,
        ..Default::default()
    };
    let mut noise = RngStream::new(seed, 1);
    let run = match params.scaling {
        Scaling::Exponential => run_exponential(&mut oracle, &x0, &params, &opts, &mut noise)?,
        Scaling::Uniform => run_uniform(&mut oracle, &x0, &params, &opts, &mut noise)?,
    };
    let mut rec = run.record.clone();
    rec.push_summary("initial_loss", oracle.base().value(&x0));
    rec.push_summary("all_radii_ok", if run.all_radii_ok() { 1.0 } else { 0.0 });
    let max_radius = run.blocks.iter().map(|b| b.goldstein.radius).fold(0.0, f64::max);
    rec.push_summary("max_block_radius", max_radius);
    Ok(vec![rec])
}

fn ablate_seed(c: &AblateConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (i, kind) in ablate_optimizers(c)?.into_iter().enumerate() {
        let base = objective_by_id(&c.problem, c.dim)?;
        let noise_model = if c.noise > 0.0 {
            NoiseModel::BoundedUniform(DenseVector::filled(c.dim, c.noise))
        } else {
            NoiseModel::None
        };
        // Same gradient-noise stream for every optimizer within a seed.
        let mut oracle = StochasticOracle::new(base, noise_model, RngStream::new(seed, 2))?;
        let cfg = TrainConfig {
            kind,
            hyper: ablate_hyper(c, kind),
            schedule: LrSchedule::parse(&c.schedule, c.lr, c.steps)?,
            steps: c.steps,
            x1: DenseVector::filled(c.dim, c.x0_value),
            record_iterates: c.record_iterates,
        };
        let run = train(&mut oracle, &cfg, &mut RngStream::new(seed, 100 + i as u64))?;
        let mut rec = run.record;
        if let Some(row) = trick_matrix().into_iter().find(|r| r.kind == kind) {
            rec.push_summary("trick_structural_noise", f64::from(u8::from(row.structural_noise)));
            rec.push_summary("trick_sigma_depends_on_m", f64::from(u8::from(row.sigma_depends_on_m)));
            rec.push_summary("trick_inf_norm_on_sigma", f64::from(u8::from(row.inf_norm_on_sigma)));
        }
        let mean_snr = stats(&rec.column("snr_rms").unwrap().into_iter().flatten().collect::<Vec<_>>())
            .map(|s| s.mean)
            .unwrap_or(0.0);
        rec.push_summary("mean_snr_rms", mean_snr);
        out.push(rec);
    }
    Ok(out)
}

fn bruteforce_seed(c: &BruteforceConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let domain = BoxDomain::cube(c.dim, -c.radius, c.radius)?;
    let bound = DenseVector::filled(c.dim, c.bound);
    let learner = match &c.learner {
        Some(v) => DenseVector::try_from_vec(v.clone())?,
        None => domain.center(),
    };
    let exact = exhaustive_expected_max_regret(c.horizon, &domain, &bound, &learner)?;
    let samples = sampled_max_regret(&mut RngStream::new(seed, 0), c.horizon, &domain, &bound, &learner, c.samples)?;
    let s = stats(&samples).expect("samples is positive");
    let mut rec = RunRecord::new("bruteforce", "horizon", strings(&["exact", "mc_mean", "mc_stderr"]));
    rec.push(c.horizon as u64, vec![Some(exact), Some(s.mean), Some(s.stderr)]);
    rec.push_summary("exact", exact);
    rec.push_summary("mc_mean", s.mean);
    rec.push_summary("mc_stderr", s.stderr);
    Ok(vec![rec])
}

fn median(values: &[f64]) -> f64 {
    stats(values).map(|s| s.median).unwrap_or(f64::NAN)
}

fn mean(values: &[f64]) -> f64 {
    stats(values).map(|s| s.mean).unwrap_or(f64::NAN)
}

fn evaluate_checks(config: &ExperimentConfig, seeds: &[SeedResult]) -> Result<Vec<Check>> {
    let values = |series: &str, key: &str| -> Vec<f64> {
        seeds
            .iter()
            .flat_map(|s| s.records.iter())
            .filter(|r| r.series() == series)
            .filter_map(|r| r.summary_value(key))
            .collect()
    };
    let worst = |series: &str, key: &str| values(series, key).into_iter().fold(0.0, f64::max);
    let mut checks = Vec::new();
    match config.kind() {
        ExperimentKind::VerifySign => {
            let c = &config.verify_sign;
            let mean_tol = c.mean_tol.unwrap_or(4.0 / (c.draws as f64).sqrt());
            let w = worst("sign", "worst_max_mean_err");
            checks.push(Check::new("unbiased mean", w <= mean_tol, format!("max |mean - x/G| = {w:.5} (tol {mean_tol:.5})")));
            let w = worst("sign", "worst_max_p_plus_err");
            checks.push(Check::new("sign law", w <= c.law_tol, format!("max |P(+1) - (G+x)/2G| = {w:.5} (tol {})", c.law_tol)));
            let w = worst("sign", "worst_max_var_err");
            checks.push(Check::new("per-coordinate variance", w <= c.var_tol, format!("max error {w:.5} (tol {})", c.var_tol)));
            let w = worst("sign", "worst_total_var_err");
            let tol = c.total_var_tol * c.dim as f64;
            checks.push(Check::new("total variance", w <= tol, format!("max error {w:.5} (tol {tol})")));
            let em = values("sign", "exp_mean");
            let es = values("sign", "exp_second_moment");
            let me = em.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            let se = es.iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max);
            checks.push(Check::new("Exp(1) mean", me <= c.exp_mean_tol, format!("max |E[s] - 1| = {me:.5}")));
            checks.push(Check::new("Exp(1) second moment", se <= c.exp_second_tol, format!("max |E[s²] - 2| = {se:.5}")));
        }
        ExperimentKind::ConvexDemo => {
            let c = &config.convex_demo;
            let drift = worst("signsgd", "max_sum_drift");
            let kinks = worst("signsgd", "hit_kink");
            let floor = values("signsgd", "min_loss").into_iter().fold(f64::INFINITY, f64::min);
            checks.push(Check::new(
                "signsgd conserves x1+x2",
                drift <= c.conservation_tol && kinks == 0.0,
                format!("max drift {drift:.3e}, kink hits {kinks}"),
            ));
            checks.push(Check::new(
                "signsgd loss floor",
                floor >= 1.0 - c.conservation_tol,
                format!("min f(x_t) = {floor:.6}"),
            ));
            let avg = values("stosignsgd", "final_avg_loss");
            let bound = std::f64::consts::SQRT_2 * 2.0 * fig1_objective().lipschitz().norms().l1 / (c.horizon as f64).sqrt();
            let m = median(&avg);
            checks.push(Check::new(
                "stosignsgd averaged iterate",
                m <= c.slack * bound,
                format!("median f(x̄_T) = {m:.5} (bound {:.5})", c.slack * bound),
            ));
        }
        ExperimentKind::OnlineRegret => {
            let c = &config.online_regret;
            let mut means = Vec::new();
            for &h in &c.horizons {
                let series = format!("T={h}");
                let m = mean(&values(&series, "max_regret"));
                let env = values(&series, "envelope")[0];
                checks.push(Check::new(
                    format!("regret envelope T={h}"),
                    m <= env,
                    format!("mean max-regret {m:.3} vs envelope {env:.3}"),
                ));
                means.push((h, m));
            }
            let mut sorted = means.clone();
            sorted.sort_by_key(|&(h, _)| h);
            for w in sorted.windows(2) {
                let ((h1, r1), (h2, r2)) = (w[0], w[1]);
                if h2 > h1 {
                    let ratio = r2 / r1;
                    let limit = h2 as f64 / h1 as f64;
                    checks.push(Check::new(
                        format!("sublinear {h1}->{h2}"),
                        ratio < limit,
                        format!("regret ratio {ratio:.3} (linear growth would be {limit})"),
                    ));
                }
            }
        }
        ExperimentKind::Nonconvex => {
            let c = &config.nonconvex;
            let series = Scaling::parse(&c.variant)?.id();
            let best = values(series, "best_surrogate");
            let first = values(series, "first_surrogate");
            checks.push(Check::new(
                "surrogate descent",
                median(&best) <= median(&first),
                format!("median best {:.4} vs median first-block {:.4}", median(&best), median(&first)),
            ));
            let params = nonconvex_params(c, &config.oracle_l1(c)?)?;
            if params.scaling == Scaling::Uniform && params.d_inf * params.n as f64 <= params.delta * (1.0 + 1e-12) {
                let ok = values(series, "all_radii_ok").iter().all(|&v| v == 1.0);
                let r = worst(series, "max_block_radius");
                checks.push(Check::new("block radius", ok, format!("max block radius {r:.4e} (δ = {})", params.delta)));
            }
        }
        ExperimentKind::Ablate => {
            let c = &config.ablate;
            for kind in ablate_optimizers(c)? {
                let col: Vec<f64> = seeds
                    .iter()
                    .flat_map(|s| s.records.iter())
                    .filter(|r| r.series() == kind.id())
                    .flat_map(|r| r.column("snr_rms").unwrap().into_iter().flatten())
                    .collect();
                let w = col.iter().cloned().fold(0.0, f64::max);
                checks.push(Check::new(
                    format!("{kind} snr rms ≤ 1"),
                    w <= 1.0,
                    format!("max ‖clamp(m/σ)‖_RMS = {w:.4}"),
                ));
            }
        }
        ExperimentKind::AdversaryBruteforce => {
            let c = &config.adversary_bruteforce;
            let exact = values("bruteforce", "exact")[0];
            let means = values("bruteforce", "mc_mean");
            let ses = values("bruteforce", "mc_stderr");
            let pooled = mean(&means);
            let pooled_se = ses.iter().map(|s| s * s).sum::<f64>().sqrt() / ses.len() as f64;
            checks.push(Check::new(
                "sampled vs exhaustive",
                (pooled - exact).abs() <= c.z * pooled_se,
                format!("exact {exact}, sampled {pooled:.5} ± {pooled_se:.5}"),
            ));
        }
    }
    Ok(checks)
}

/// Writes every record of every series in one table, columns unioned in order of first use.
fn write_seed_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut columns: Vec<String> = Vec::new();
    for r in records {
        for c in r.columns() {
            if !columns.contains(c) {
                columns.push(c.clone());
            }
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["series".to_string(), "step".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for r in records {
        let idx: Vec<Option<usize>> = columns.iter().map(|c| r.column_index(c)).collect();
        for row in r.rows() {
            let mut fields = vec![r.series().to_string(), row.step.to_string()];
            fields.extend(
                idx.iter()
                    .map(|i| i.and_then(|i| row.values[i]).map(fmt_f64).unwrap_or_default()),
            );
            w.write_record(&fields)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_artifacts(dir: &Path, kind: ExperimentKind, outcome: &ExperimentOutcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for s in &outcome.seeds {
        let path = dir.join(format!("seed_{}.csv", s.seed));
        write_seed_csv(&path, &s.records)?;
        files.push(path);
    }

    let path = dir.join("aggregate.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_aggregate_csv(&outcome.aggregate, std::io::BufWriter::new(file))?;
    files.push(path);

    let path = dir.join("summary.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["series", "seed", "key", "value"])?;
    for s in &outcome.seeds {
        for r in &s.records {
            for (k, v) in r.summary() {
                w.write_record([r.series().to_string(), s.seed.to_string(), k.clone(), fmt_f64(*v)])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    files.push(path);

    // Plot data of the cross-seed mean of the kind's headline metric.
    let metric = kind.plot_metric();
    let mut series_records: Vec<RunRecord> = Vec::new();
    for row in outcome.aggregate.iter().filter(|r| r.metric == metric) {
        if series_records.last().map(|r| r.series()) != Some(row.series.as_str()) {
            series_records.push(RunRecord::new(row.series.clone(), "step", vec![metric.to_string()]));
        }
        series_records.last_mut().unwrap().push(row.step, vec![Some(row.mean)]);
    }
    if !series_records.is_empty() {
        let points = emit_plotdata(&series_records, metric)?;
        let path = dir.join("plotdata.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_plotdata_csv(&points, std::io::BufWriter::new(file))?;
        files.push(path);
    }
    Ok(files)
}

/// Parses `1,2,5` or `1..10` (inclusive) into a seed list.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list '{spec}'"));
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
            [experiment]
            kind = "ablate"
            seeds = [3, 4]

            [ablate]
            steps = 20
            optimizers = ["adamw", "stosignsgd"]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.kind(), ExperimentKind::Ablate);
        assert_eq!(cfg.ablate.steps, 20);
        assert_eq!(cfg.ablate.lr, AblateConfig::default().lr);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn config_errors() {
        let unknown = "[experiment]\nkind = \"ablate\"\n[ablate]\noptimizers = [\"lion\"]\n";
        assert!(matches!(ExperimentConfig::from_toml_str(unknown), Err(Error::UnknownId { .. })));
        assert!(ExperimentConfig::from_toml_str("[experiment]\nkind = \"nope\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nkind = \"ablate\"\nseeds = []\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nkind = \"ablate\"\nbogus = 1\n").is_err());
        let big = "[experiment]\nkind = \"nonconvex\"\n[nonconvex]\nschedule = \"theorem\"\neps = 0.01\n";
        match ExperimentConfig::from_toml_str(big) {
            Err(Error::Guardrail { horizon, .. }) => assert!(horizon > 10_000_000),
            other => panic!("expected guardrail refusal, got {other:?}"),
        }
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn bruteforce_exact_field() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::AdversaryBruteforce);
        cfg.experiment.seeds = vec![1, 2];
        cfg.adversary_bruteforce.samples = 2000;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.summary_values("bruteforce", "exact"), vec![0.75, 0.75]);
        assert!(out.passed());
    }

    #[test]
    fn small_runs_pass_checks() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::OnlineRegret);
        cfg.experiment.seeds = vec![1, 2, 3];
        cfg.online_regret.horizons = vec![64, 256];
        let out = run_experiment(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.checks);

        let mut cfg = ExperimentConfig::new(ExperimentKind::Nonconvex);
        cfg.nonconvex.variant = "uniform".into();
        cfg.nonconvex.k = 4;
        cfg.nonconvex.n = 20;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.checks.iter().any(|c| c.name == "block radius"));
        assert!(out.passed(), "{:?}", out.checks);
    }
}
