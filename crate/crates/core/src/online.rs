//! Online stochastic sign subgradient descent over a box.
//!
//! Each round the learner plays `x_t`, receives `g_t`, and updates
//!
//! ```text
//! G_t     = max(G_{t-1}, |g_t|)
//! x_{t+1} = Π^{G_t}_box[ x_t - η_t · sgn(g_t + G_t ⊙ n_t) ],   n_t ~ Unif[-1,1]^d
//! ```
//!
//! with either the anytime step `η_t = D∞ / sqrt(2t)` or the fixed-horizon
//! step `η_t = D∞ / sqrt(T)`. Since `G_t >= |g_t|` by construction the sign is
//! an unbiased estimate of `g_t / G_t`.

use crate::error::{Error, Result};
use crate::geometry::{project_weighted, BoxDomain};
use crate::math::{elementwise_max, DenseVector, NoiseSource};
use crate::problems::{AdversarySequence, Objective, RegretTracker, StochasticOracle};
use crate::record::RunRecord;
use crate::sign::{det_sign, stochastic_sign, SignVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    /// `D∞ / sqrt(2t)`; needs no horizon.
    Anytime,
    /// `D∞ / sqrt(T)` for a known horizon.
    Fixed { horizon: usize },
}

pub fn eta(t: usize, d_inf: f64, schedule: StepSchedule) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("t", "rounds are numbered from 1"));
    }
    match schedule {
        StepSchedule::Anytime => Ok(d_inf / (2.0 * t as f64).sqrt()),
        StepSchedule::Fixed { horizon: 0 } => Err(Error::invalid("horizon", "T must be at least 1")),
        StepSchedule::Fixed { horizon } => Ok(d_inf / (horizon as f64).sqrt()),
    }
}

/// Which update the learner applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Learner {
    /// Stochastic sign with the max-buffer noise scale.
    StoSign,
    /// Deterministic sign, same schedule and projection.
    SignSgd,
}

#[derive(Clone, Debug)]
pub struct OnlineState {
    x: DenseVector,
    g_max: DenseVector,
    t: usize,
    domain: BoxDomain,
    schedule: StepSchedule,
    d_inf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineStep {
    /// Round just completed.
    pub t: usize,
    pub eta: f64,
    pub sign: SignVector,
}

impl OnlineState {
    /// Starts at `x1`, or at the box center when `None`. `D∞` is the box's ∞-diameter.
    pub fn new(domain: BoxDomain, x1: Option<DenseVector>, schedule: StepSchedule) -> Result<Self> {
        let x = x1.unwrap_or_else(|| domain.center());
        x.check_len(domain.dim())?;
        if !domain.contains(&x) {
            return Err(Error::invalid("x1", "initial point lies outside the box"));
        }
        Ok(OnlineState {
            g_max: DenseVector::zeros(domain.dim()),
            d_inf: domain.diameter_inf(),
            x,
            t: 0,
            domain,
            schedule,
        })
    }

    pub fn x(&self) -> &DenseVector {
        &self.x
    }

    pub fn g_max(&self) -> &DenseVector {
        &self.g_max
    }

    /// Completed rounds.
    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn d_inf(&self) -> f64 {
        self.d_inf
    }

    pub fn schedule(&self) -> StepSchedule {
        self.schedule
    }

    /// One round of online StoSignSGD on gradient `g` observed at the current iterate.
    pub fn step<N: NoiseSource + ?Sized>(&mut self, g: &DenseVector, noise: &mut N) -> Result<OnlineStep> {
        self.advance(g, |g, g_max| stochastic_sign(g, g_max, noise))
    }

    /// One round of projected deterministic SignSGD.
    pub fn step_signsgd(&mut self, g: &DenseVector) -> Result<OnlineStep> {
        self.advance(g, |g, _| Ok(det_sign(g)))
    }

    fn advance(
        &mut self,
        g: &DenseVector,
        sign: impl FnOnce(&DenseVector, &DenseVector) -> Result<SignVector>,
    ) -> Result<OnlineStep> {
        g.check_len(self.x.len())?;
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index, value: g[index] });
        }
        let t = self.t + 1;
        let eta = eta(t, self.d_inf, self.schedule)?;
        self.g_max = elementwise_max(&self.g_max, &g.abs())?;
        let s = sign(g, &self.g_max)?;
        let proposal: DenseVector = self
            .x
            .iter()
            .zip(s.iter())
            .map(|(&x, &s)| x - eta * f64::from(s))
            .collect();
        self.x = project_weighted(&proposal, &self.g_max, &self.domain)?;
        self.t = t;
        Ok(OnlineStep { t, eta, sign: s })
    }
}

/// Free-function form of [`OnlineState::step`].
pub fn online_step<N: NoiseSource + ?Sized>(state: &mut OnlineState, g: &DenseVector, noise: &mut N) -> Result<OnlineStep> {
    state.step(g, noise)
}

/// What the learner sees in round `t` after playing `x`.
pub trait LossSource {
    fn dim(&self) -> usize;
    /// Loss value and (sub)gradient of round `t` at `x`.
    fn observe(&mut self, t: usize, x: &DenseVector) -> (f64, DenseVector);
    /// Loss of round `t` at a fixed comparator.
    fn comparator_loss(&self, t: usize, u: &DenseVector) -> f64;
    /// Whether losses are linear, which makes the hindsight maximizer analytic.
    fn is_linear(&self) -> bool;
}

impl LossSource for AdversarySequence {
    fn dim(&self) -> usize {
        AdversarySequence::dim(self)
    }

    fn observe(&mut self, t: usize, x: &DenseVector) -> (f64, DenseVector) {
        let g = self.round(t).clone();
        (g.dot(x).expect("dimension checked by the driver"), g)
    }

    fn comparator_loss(&self, t: usize, u: &DenseVector) -> f64 {
        self.round(t).dot(u).expect("dimension checked by the driver")
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// A fixed objective seen through a stochastic oracle; the loss is the clean value.
impl<P: Objective> LossSource for StochasticOracle<P> {
    fn dim(&self) -> usize {
        self.base().dim()
    }

    fn observe(&mut self, _t: usize, x: &DenseVector) -> (f64, DenseVector) {
        (self.base().value(x), self.sample(x))
    }

    fn comparator_loss(&self, _t: usize, u: &DenseVector) -> f64 {
        self.base().value(u)
    }

    fn is_linear(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineRow {
    pub t: usize,
    pub eta: f64,
    pub loss: f64,
    /// Cumulative regret against the fixed comparator, when one applies.
    pub regret: Option<f64>,
    /// Cumulative regret against the best point in hindsight (linear losses only).
    pub max_regret: Option<f64>,
    pub g_max_l1: f64,
    /// Iterate played in round `t`.
    pub x: DenseVector,
    pub g: DenseVector,
}

#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub rows: Vec<OnlineRow>,
    /// `x_{T+1}`.
    pub final_x: DenseVector,
    /// `(1/T) Σ_{t≤T} x_t`.
    pub average: DenseVector,
    pub final_g_max: DenseVector,
}

impl OnlineRun {
    pub fn iterates(&self) -> impl Iterator<Item = &DenseVector> {
        self.rows.iter().map(|r| &r.x)
    }

    pub fn final_max_regret(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.max_regret)
    }

    /// Rows as `t, eta, loss, regret_cum, regret_max_cum, G_l1, x_0..x_{d-1}`.
    /// Iterate columns are included only when `with_iterates` is set.
    pub fn record(&self, series: &str, with_iterates: bool) -> RunRecord {
        let d = self.final_x.len();
        let mut columns: Vec<String> = ["eta", "loss", "regret_cum", "regret_max_cum", "G_l1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if with_iterates {
            columns.extend((0..d).map(|i| format!("x_{i}")));
        }
        let mut record = RunRecord::new(series, "t", columns);
        for row in &self.rows {
            let mut values = vec![Some(row.eta), Some(row.loss), row.regret, row.max_regret, Some(row.g_max_l1)];
            if with_iterates {
                values.extend(row.x.iter().map(|&v| Some(v)));
            }
            record.push(row.t as u64, values);
        }
        record
    }
}

#[derive(Clone, Debug)]
pub struct OnlineConfig {
    pub horizon: usize,
    pub domain: BoxDomain,
    pub schedule: StepSchedule,
    pub learner: Learner,
    /// Starting point; box center when `None`.
    pub x1: Option<DenseVector>,
    /// Fixed comparator for `regret_cum`. Linear sources default to the box center.
    pub comparator: Option<DenseVector>,
}

impl OnlineConfig {
    pub fn new(horizon: usize, domain: BoxDomain) -> Self {
        OnlineConfig {
            horizon,
            domain,
            schedule: StepSchedule::Anytime,
            learner: Learner::StoSign,
            x1: None,
            comparator: None,
        }
    }
}

/// Plays `horizon` rounds against `source`.
pub fn run_online<S, N>(source: &mut S, config: &OnlineConfig, noise: &mut N) -> Result<OnlineRun>
where
    S: LossSource + ?Sized,
    N: NoiseSource + ?Sized,
{
    if config.horizon == 0 {
        return Err(Error::invalid("horizon", "T must be at least 1"));
    }
    if source.dim() != config.domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.domain.dim(),
            found: source.dim(),
        });
    }
    let mut state = OnlineState::new(config.domain.clone(), config.x1.clone(), config.schedule)?;
    let linear = source.is_linear();
    let comparator = match (&config.comparator, linear) {
        (Some(u), _) => Some(u.clone()),
        (None, true) => Some(config.domain.center()),
        (None, false) => None,
    };
    let mut tracker = if linear {
        Some(RegretTracker::new(config.domain.clone(), comparator.clone())?)
    } else {
        None
    };
    let mut comparator_regret = 0.0;
    let mut rows = Vec::with_capacity(config.horizon);
    let mut sum = DenseVector::zeros(config.domain.dim());

    for t in 1..=config.horizon {
        let x = state.x().clone();
        let (loss, g) = source.observe(t, &x);
        g.check_len(x.len())?;
        let (regret, max_regret) = match (&mut tracker, &comparator) {
            (Some(tr), _) => {
                tr.observe(&g, &x)?;
                (Some(tr.regret()), Some(tr.max_regret()))
            }
            (None, Some(u)) => {
                comparator_regret += loss - source.comparator_loss(t, u);
                (Some(comparator_regret), None)
            }
            (None, None) => (None, None),
        };
        let step = match config.learner {
            Learner::StoSign => state.step(&g, noise)?,
            Learner::SignSgd => state.step_signsgd(&g)?,
        };
        sum = sum.add(&x)?;
        rows.push(OnlineRow {
            t,
            eta: step.eta,
            loss,
            regret,
            max_regret,
            g_max_l1: state.g_max().norms().l1,
            x,
            g,
        });
    }
    Ok(OnlineRun {
        average: sum.scaled(1.0 / config.horizon as f64),
        final_x: state.x().clone(),
        final_g_max: state.g_max().clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{FixedNoise, RngStream};
    use crate::problems::{fig1_objective, rademacher_adversary};

    #[test]
    fn eta_values() {
        assert!((eta(1, 1.0, StepSchedule::Anytime).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(eta(8, 2.0, StepSchedule::Anytime).unwrap(), 0.5);
        assert!((eta(5, 1.0, StepSchedule::Fixed { horizon: 100 }).unwrap() - 0.1).abs() < 1e-15);
        assert!(eta(0, 1.0, StepSchedule::Anytime).is_err());
    }

    #[test]
    fn buffer_is_elementwise_max() {
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let mut state = OnlineState::new(domain, None, StepSchedule::Anytime).unwrap();
        state.step(&[1.0, 3.0].into(), &mut FixedNoise::zero()).unwrap();
        state.step(&[2.0, -1.0].into(), &mut FixedNoise::zero()).unwrap();
        assert_eq!(state.g_max().as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn zero_noise_reduces_to_sign() {
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let mut state = OnlineState::new(domain, None, StepSchedule::Fixed { horizon: 100 }).unwrap();
        let step = state.step(&[2.0, -1.0].into(), &mut FixedNoise::zero()).unwrap();
        assert_eq!(step.sign.as_slice(), &[1, -1]);
        assert_eq!(state.x().as_slice(), &[-step.eta, step.eta]);
    }

    #[test]
    fn zero_gradient_round_is_inert() {
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let x1: DenseVector = [0.25, -0.5].into();
        let mut state = OnlineState::new(domain, Some(x1.clone()), StepSchedule::Anytime).unwrap();
        let step = state.step(&DenseVector::zeros(2), &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(step.sign.as_slice(), &[0, 0]);
        assert_eq!(state.x(), &x1);
    }

    #[test]
    fn single_round_matches_step() {
        let domain = BoxDomain::cube(3, -1.0, 1.0).unwrap();
        let mut seq = AdversarySequence::new(vec![[1.0, -0.5, 0.25].into()], [1.0; 3].into()).unwrap();
        let run = run_online(&mut seq, &OnlineConfig::new(1, domain.clone()), &mut RngStream::new(5, 5)).unwrap();
        let mut state = OnlineState::new(domain, None, StepSchedule::Anytime).unwrap();
        state.step(&[1.0, -0.5, 0.25].into(), &mut RngStream::new(5, 5)).unwrap();
        assert_eq!(&run.final_x, state.x());
    }

    #[test]
    fn invariants_along_trajectory() {
        let domain = BoxDomain::cube(4, -1.0, 1.0).unwrap();
        let mut seq = rademacher_adversary(&mut RngStream::new(8, 0), 500, 4, &[1.0, 0.5, 2.0, 1.0].into()).unwrap();
        let run = run_online(&mut seq, &OnlineConfig::new(500, domain.clone()), &mut RngStream::new(8, 1)).unwrap();
        let mut running = DenseVector::zeros(4);
        let mut prev_l1 = 0.0;
        for row in &run.rows {
            assert!(domain.contains(&row.x));
            running = elementwise_max(&running, &row.g.abs()).unwrap();
            assert!(row.g_max_l1 >= prev_l1);
            assert_eq!(row.g_max_l1, running.norms().l1);
            prev_l1 = row.g_max_l1;
        }
        assert_eq!(run.final_g_max, running);
        assert!(domain.contains(&run.final_x));
    }

    #[test]
    fn noiseless_hook_equals_signsgd() {
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let mut cfg = OnlineConfig::new(300, domain);
        cfg.x1 = Some([0.8, 0.2].into());
        let mut a = StochasticOracle::exact(fig1_objective());
        let sto = run_online(&mut a, &cfg, &mut FixedNoise::zero()).unwrap();
        cfg.learner = Learner::SignSgd;
        let mut b = StochasticOracle::exact(fig1_objective());
        let det = run_online(&mut b, &cfg, &mut FixedNoise::zero()).unwrap();
        for (r1, r2) in sto.rows.iter().zip(&det.rows) {
            assert_eq!(r1.x.as_slice(), r2.x.as_slice());
        }
        assert_eq!(sto.final_x, det.final_x);
    }

    #[test]
    fn rejects_bad_inputs() {
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        assert!(OnlineState::new(domain.clone(), Some([2.0, 0.0].into()), StepSchedule::Anytime).is_err());
        let mut state = OnlineState::new(domain, None, StepSchedule::Anytime).unwrap();
        assert!(state.step(&[1.0].into(), &mut FixedNoise::zero()).is_err());
    }
}
