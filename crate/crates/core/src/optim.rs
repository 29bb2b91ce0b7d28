//! Practical optimizers with decoupled weight decay.
//!
//! Every optimizer keeps a numerator `m` and a preconditioner `σ` and moves
//! `x ← x - η · dir - η λ x`. The general update uses `dir = m / σ`; the sign
//! conversion uses `dir = sign(m + σ ⊙ n)` with `n ~ Unif[-1, 1]^d`, which has
//! mean `clamp(m / σ, -1, 1)`.
//!
//! | id              | m                      | σ              | dir            |
//! |-----------------|------------------------|----------------|----------------|
//! | `signsgd`       | EMA, `m₁ = g₁`         | `|m|`          | `sign(m)`      |
//! | `adamw`         | bias-corrected EMA     | `√v̂ + ε`       | `m̂ / σ`        |
//! | `adamax`        | bias-corrected EMA     | `u + ε`        | `m̂ / σ`        |
//! | `ie-stosignsgd` | EMA, `m₁ = g₁`         | `max(β₂G, |m|)`| `m / G`        |
//! | `sign-adamw`    | as `adamw`             | as `adamw`     | sign converted |
//! | `sign-adamax`   | as `adamax`            | as `adamax`    | sign converted |
//! | `stosignsgd`    | EMA, `m₁ = g₁`         | `max(G, |m|)`  | sign converted |
//! | `stosignsgd-v2` | EMA, `m₁ = g₁`         | `max(β₂G, |m|)`| sign converted |

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{DenseVector, NoiseSource};
use crate::problems::{Objective, StochasticOracle};
use crate::record::RunRecord;
use crate::sign::{clamped_ratio, det_sign, sign_with_noise, snr_metrics, SnrMetrics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptimizerKind {
    StoSignSgd,
    StoSignSgdV2,
    SignSgd,
    AdamW,
    AdaMax,
    SignAdamW,
    SignAdaMax,
    IeStoSignSgd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 8] = [
        OptimizerKind::StoSignSgd,
        OptimizerKind::StoSignSgdV2,
        OptimizerKind::SignSgd,
        OptimizerKind::AdamW,
        OptimizerKind::AdaMax,
        OptimizerKind::SignAdamW,
        OptimizerKind::SignAdaMax,
        OptimizerKind::IeStoSignSgd,
    ];

    pub fn id(self) -> &'static str {
        match self {
            OptimizerKind::StoSignSgd => "stosignsgd",
            OptimizerKind::StoSignSgdV2 => "stosignsgd-v2",
            OptimizerKind::SignSgd => "signsgd",
            OptimizerKind::AdamW => "adamw",
            OptimizerKind::AdaMax => "adamax",
            OptimizerKind::SignAdamW => "sign-adamw",
            OptimizerKind::SignAdaMax => "sign-adamax",
            OptimizerKind::IeStoSignSgd => "ie-stosignsgd",
        }
    }

    pub fn parse(id: &str) -> Result<OptimizerKind> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.id() == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "optimizer",
                id: id.to_string(),
            })
    }

    /// Optimizers whose update is `sign(m + σ ⊙ n)`.
    pub fn is_sign_converted(self) -> bool {
        matches!(
            self,
            OptimizerKind::StoSignSgd | OptimizerKind::StoSignSgdV2 | OptimizerKind::SignAdamW | OptimizerKind::SignAdaMax
        )
    }

    /// The general-update optimizer a sign-converted one shares its buffers with.
    pub fn base(self) -> OptimizerKind {
        match self {
            OptimizerKind::SignAdamW => OptimizerKind::AdamW,
            OptimizerKind::SignAdaMax => OptimizerKind::AdaMax,
            OptimizerKind::StoSignSgd | OptimizerKind::StoSignSgdV2 => OptimizerKind::IeStoSignSgd,
            other => other,
        }
    }

    pub fn default_hyper(self) -> Hyper {
        let beta2 = match self {
            OptimizerKind::AdamW | OptimizerKind::SignAdamW | OptimizerKind::AdaMax | OptimizerKind::SignAdaMax => 0.999,
            OptimizerKind::StoSignSgdV2 | OptimizerKind::IeStoSignSgd => 0.99995,
            OptimizerKind::StoSignSgd | OptimizerKind::SignSgd => 1.0,
        };
        Hyper {
            beta1: 0.9,
            beta2,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyper {
    pub beta1: f64,
    /// Ignored by `stosignsgd` (undamped max) and `signsgd`.
    pub beta2: f64,
    /// Used by the AdamW and AdaMax families.
    pub eps: f64,
    pub weight_decay: f64,
}

impl Hyper {
    pub fn validate(&self, kind: OptimizerKind) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::invalid("beta1", format!("{} must lie in [0, 1)", self.beta1)));
        }
        let damped_max = matches!(kind, OptimizerKind::StoSignSgdV2 | OptimizerKind::IeStoSignSgd);
        let beta2_ok = if damped_max {
            self.beta2 > 0.0 && self.beta2 <= 1.0
        } else {
            (0.0..1.0).contains(&self.beta2) || matches!(kind, OptimizerKind::StoSignSgd | OptimizerKind::SignSgd)
        };
        if !beta2_ok {
            return Err(Error::invalid("beta2", format!("{} is out of range for {kind}", self.beta2)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::invalid("eps", format!("{} must be non-negative", self.eps)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay", format!("{} must be non-negative", self.weight_decay)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PracticalState {
    pub kind: OptimizerKind,
    pub x: DenseVector,
    pub m: DenseVector,
    /// `G`, `v` or `u` depending on `kind`.
    pub precond: DenseVector,
    pub t: u64,
    pub hyper: Hyper,
}

/// What one step did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// Numerator fed to the update (`m` or `m̂`).
    pub numerator: DenseVector,
    /// Preconditioner `σ`.
    pub sigma: DenseVector,
    /// Multiplies `-η`; sign entries for sign updates.
    pub direction: DenseVector,
}

impl PracticalState {
    pub fn new(kind: OptimizerKind, x1: DenseVector, hyper: Hyper) -> Result<Self> {
        hyper.validate(kind)?;
        if x1.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let d = x1.len();
        Ok(PracticalState {
            kind,
            x: x1,
            m: DenseVector::zeros(d),
            precond: DenseVector::zeros(d),
            t: 0,
            hyper,
        })
    }

    pub fn with_defaults(kind: OptimizerKind, x1: DenseVector) -> Result<Self> {
        PracticalState::new(kind, x1, kind.default_hyper())
    }

    /// Dispatches on `kind`. Noise is drawn only by sign-converted optimizers.
    pub fn step<N: NoiseSource + ?Sized>(&mut self, g: &DenseVector, lr: f64, noise: &mut N) -> Result<StepInfo> {
        match self.kind {
            OptimizerKind::StoSignSgd => step_stosignsgd(self, g, lr, noise),
            OptimizerKind::StoSignSgdV2 => step_stosignsgd_v2(self, g, lr, noise),
            OptimizerKind::SignSgd => step_signsgd(self, g, lr),
            OptimizerKind::AdamW => step_adamw(self, g, lr),
            OptimizerKind::AdaMax => step_adamax(self, g, lr),
            OptimizerKind::SignAdamW | OptimizerKind::SignAdaMax => step_sign_converted(self, g, lr, noise),
            OptimizerKind::IeStoSignSgd => step_ie_stosignsgd(self, g, lr),
        }
    }
}

fn expect_kind(state: &PracticalState, allowed: &[OptimizerKind]) -> Result<()> {
    if allowed.contains(&state.kind) {
        Ok(())
    } else {
        Err(Error::invalid(
            "optimizer",
            format!("state is tagged {}, expected one of {allowed:?}", state.kind),
        ))
    }
}

fn check_grad(state: &PracticalState, g: &DenseVector) -> Result<()> {
    g.check_len(state.x.len())?;
    if let Some(index) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index, value: g[index] });
    }
    Ok(())
}

/// `m₁ = g₁`, then `m_t = β₁ m_{t-1} + (1 - β₁) g_t`.
fn momentum_from_first(state: &mut PracticalState, g: &DenseVector) {
    let b1 = state.hyper.beta1;
    if state.t == 0 {
        state.m = g.clone();
    } else {
        for (m, &gi) in state.m.as_mut_slice().iter_mut().zip(g.iter()) {
            *m = b1 * *m + (1.0 - b1) * gi;
        }
    }
}

/// `m_t = β₁ m_{t-1} + (1 - β₁) g_t` from `m₀ = 0`.
fn momentum_from_zero(state: &mut PracticalState, g: &DenseVector) {
    let b1 = state.hyper.beta1;
    for (m, &gi) in state.m.as_mut_slice().iter_mut().zip(g.iter()) {
        *m = b1 * *m + (1.0 - b1) * gi;
    }
}

/// `G ← max(β G, |m|)`.
fn damped_max(state: &mut PracticalState, beta: f64) {
    for (gm, &m) in state.precond.as_mut_slice().iter_mut().zip(state.m.iter()) {
        *gm = (beta * *gm).max(m.abs());
    }
}

fn apply(state: &mut PracticalState, lr: f64, direction: &DenseVector) {
    let wd = state.hyper.weight_decay;
    for (x, &dir) in state.x.as_mut_slice().iter_mut().zip(direction.iter()) {
        *x = *x - lr * dir - lr * wd * *x;
    }
    state.t += 1;
}

fn sign_direction<N: NoiseSource + ?Sized>(num: &DenseVector, sigma: &DenseVector, noise: &mut N) -> Result<DenseVector> {
    let n = noise.uniform_sym(num.len());
    Ok(sign_with_noise(num, sigma, &n)?.to_dense())
}

/// `m / σ` with `0 / 0 = 0`.
fn ratio(num: &DenseVector, sigma: &DenseVector) -> DenseVector {
    num.iter()
        .zip(sigma.iter())
        .map(|(&m, &s)| if s == 0.0 { 0.0 } else { m / s })
        .collect()
}

fn bias_corrected(state: &PracticalState) -> DenseVector {
    let t = (state.t + 1) as i32;
    let c = 1.0 - state.hyper.beta1.powi(t);
    state.m.map(|m| m / c)
}

/// Buffers of the AdamW or AdaMax family after seeing `g`; returns `(m̂, σ)`.
fn adaptive_buffers(state: &mut PracticalState, g: &DenseVector) -> (DenseVector, DenseVector) {
    momentum_from_zero(state, g);
    let b2 = state.hyper.beta2;
    let eps = state.hyper.eps;
    let m_hat = bias_corrected(state);
    let sigma = match state.kind.base() {
        OptimizerKind::AdamW => {
            for (v, &gi) in state.precond.as_mut_slice().iter_mut().zip(g.iter()) {
                *v = b2 * *v + (1.0 - b2) * gi * gi;
            }
            let c2 = 1.0 - b2.powi((state.t + 1) as i32);
            state.precond.map(|v| (v / c2).sqrt() + eps)
        }
        OptimizerKind::AdaMax => {
            for (u, &gi) in state.precond.as_mut_slice().iter_mut().zip(g.iter()) {
                *u = (b2 * *u).max(gi.abs());
            }
            state.precond.map(|u| u + eps)
        }
        other => unreachable!("{other} has no adaptive buffers"),
    };
    (m_hat, sigma)
}

/// StoSignSGD: `G ← max(G, |m|)`, `dir = sign(m + G ⊙ n)`.
pub fn step_stosignsgd<N: NoiseSource + ?Sized>(state: &mut PracticalState, g: &DenseVector, lr: f64, noise: &mut N) -> Result<StepInfo> {
    expect_kind(state, &[OptimizerKind::StoSignSgd])?;
    stosign_family(state, g, lr, 1.0, noise)
}

/// StoSignSGDv2: `G ← max(β₂ G, |m|)`, `dir = sign(m + G ⊙ n)`.
pub fn step_stosignsgd_v2<N: NoiseSource + ?Sized>(state: &mut PracticalState, g: &DenseVector, lr: f64, noise: &mut N) -> Result<StepInfo> {
    expect_kind(state, &[OptimizerKind::StoSignSgdV2])?;
    let b2 = state.hyper.beta2;
    stosign_family(state, g, lr, b2, noise)
}

fn stosign_family<N: NoiseSource + ?Sized>(
    state: &mut PracticalState,
    g: &DenseVector,
    lr: f64,
    beta2: f64,
    noise: &mut N,
) -> Result<StepInfo> {
    check_grad(state, g)?;
    momentum_from_first(state, g);
    damped_max(state, beta2);
    let direction = sign_direction(&state.m, &state.precond, noise)?;
    let info = StepInfo {
        numerator: state.m.clone(),
        sigma: state.precond.clone(),
        direction,
    };
    apply(state, lr, &info.direction);
    Ok(info)
}

/// SignSGD with momentum: `dir = sign(m)`.
pub fn step_signsgd(state: &mut PracticalState, g: &DenseVector, lr: f64) -> Result<StepInfo> {
    expect_kind(state, &[OptimizerKind::SignSgd])?;
    check_grad(state, g)?;
    momentum_from_first(state, g);
    let info = StepInfo {
        numerator: state.m.clone(),
        sigma: state.m.abs(),
        direction: det_sign(&state.m).to_dense(),
    };
    apply(state, lr, &info.direction);
    Ok(info)
}

pub fn step_adamw(state: &mut PracticalState, g: &DenseVector, lr: f64) -> Result<StepInfo> {
    expect_kind(state, &[OptimizerKind::AdamW])?;
    general_adaptive(state, g, lr)
}

pub fn step_adamax(state: &mut PracticalState, g: &DenseVector, lr: f64) -> Result<StepInfo> {
    expect_kind(state, &[OptimizerKind::AdaMax])?;
    general_adaptive(state, g, lr)
}

fn general_adaptive(state: &mut PracticalState, g: &DenseVector, lr: f64) -> Result<StepInfo> {
    check_grad(state, g)?;
    let (m_hat, sigma) = adaptive_buffers(state, g);
    let direction = ratio(&m_hat, &sigma);
    apply(state, lr, &direction);
    Ok(StepInfo {
        numerator: m_hat,
        sigma,
        direction,
    })
}

/// Sign conversion of a general optimizer. Accepts SignAdamW, SignAdaMax and
/// both StoSignSGD variants; buffers follow the base optimizer exactly.
pub fn step_sign_converted<N: NoiseSource + ?Sized>(state: &mut PracticalState, g: &DenseVector, lr: f64, noise: &mut N) -> Result<StepInfo> {
    match state.kind {
        OptimizerKind::StoSignSgd => step_stosignsgd(state, g, lr, noise),
        OptimizerKind::StoSignSgdV2 => step_stosignsgd_v2(state, g, lr, noise),
        OptimizerKind::SignAdamW | OptimizerKind::SignAdaMax => {
            check_grad(state, g)?;
            let (m_hat, sigma) = adaptive_buffers(state, g);
            let direction = sign_direction(&m_hat, &sigma, noise)?;
            apply(state, lr, &direction);
            Ok(StepInfo {
                numerator: m_hat,
                sigma,
                direction,
            })
        }
        other => Err(Error::invalid("optimizer", format!("{other} is not a sign-converted optimizer"))),
    }
}

/// IE-StoSignSGD: `G ← max(β₂ G, |m|)`, `dir = m / G` with `0 / 0 = 0`.
pub fn step_ie_stosignsgd(state: &mut PracticalState, g: &DenseVector, lr: f64) -> Result<StepInfo> {
    expect_kind(state, &[OptimizerKind::IeStoSignSgd])?;
    check_grad(state, g)?;
    momentum_from_first(state, g);
    let b2 = state.hyper.beta2;
    damped_max(state, b2);
    let direction = ratio(&state.m, &state.precond);
    let info = StepInfo {
        numerator: state.m.clone(),
        sigma: state.precond.clone(),
        direction,
    };
    apply(state, lr, &info.direction);
    Ok(info)
}

/// Expected direction of a step: `clamp(m/σ, ±1)` for sign conversions, `dir` otherwise.
pub fn expected_direction(kind: OptimizerKind, info: &StepInfo) -> DenseVector {
    if kind.is_sign_converted() {
        info.numerator
            .zip_map(&info.sigma, clamped_ratio)
            .expect("numerator and sigma share a length")
    } else {
        info.direction.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LrSchedule {
    Constant(f64),
    /// `lr / sqrt(t)`.
    InvSqrt(f64),
    /// Half-cosine from `lr` at `t = 1` to `min_lr` at `t = total`.
    Cosine { lr: f64, min_lr: f64, total: u64 },
}

impl LrSchedule {
    pub fn at(&self, t: u64) -> f64 {
        let t = t.max(1);
        match *self {
            LrSchedule::Constant(lr) => lr,
            LrSchedule::InvSqrt(lr) => lr / (t as f64).sqrt(),
            LrSchedule::Cosine { lr, min_lr, total } => {
                if total <= 1 {
                    return lr;
                }
                let p = ((t - 1) as f64 / (total - 1) as f64).min(1.0);
                min_lr + 0.5 * (lr - min_lr) * (1.0 + (PI * p).cos())
            }
        }
    }

    pub fn parse(name: &str, lr: f64, total: u64) -> Result<LrSchedule> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid("lr", format!("{lr} must be positive")));
        }
        match name {
            "constant" => Ok(LrSchedule::Constant(lr)),
            "inv-sqrt" | "invsqrt" => Ok(LrSchedule::InvSqrt(lr)),
            "cosine" => Ok(LrSchedule::Cosine { lr, min_lr: 0.0, total }),
            other => Err(Error::UnknownId {
                kind: "lr schedule",
                id: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrickRow {
    pub kind: OptimizerKind,
    pub structural_noise: bool,
    pub sigma_depends_on_m: bool,
    pub inf_norm_on_sigma: bool,
    /// Reported `‖m/σ‖_RMS`; exact 1 for sign methods, otherwise an observed magnitude.
    pub reported_rms: f64,
    pub rms_is_exact: bool,
}

/// The seven optimizers of the ablation and the tricks each one uses.
pub fn trick_matrix() -> Vec<TrickRow> {
    use OptimizerKind::*;
    let row = |kind, n, m, i, rms, exact| TrickRow {
        kind,
        structural_noise: n,
        sigma_depends_on_m: m,
        inf_norm_on_sigma: i,
        reported_rms: rms,
        rms_is_exact: exact,
    };
    vec![
        row(SignSgd, false, false, false, 1.0, true),
        row(AdamW, false, false, false, 0.2, false),
        row(AdaMax, false, false, true, 0.1, false),
        row(IeStoSignSgd, false, true, true, 0.4, false),
        row(SignAdamW, true, false, false, 1.0, true),
        row(SignAdaMax, true, false, true, 1.0, true),
        row(StoSignSgd, true, true, true, 1.0, true),
    ]
}

/// Configuration for [`train`].
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub kind: OptimizerKind,
    pub hyper: Hyper,
    pub schedule: LrSchedule,
    pub steps: u64,
    pub x1: DenseVector,
    pub record_iterates: bool,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub record: RunRecord,
    pub final_state: PracticalState,
    /// SNR diagnostics at the last step.
    pub final_snr: SnrMetrics,
}

/// Runs an optimizer against a stochastic oracle. Rows are
/// `t, lr, loss, snr_rms, update_inf` (plus iterates when requested), where
/// `loss` is the clean objective at `x_t` and `snr_rms = ‖clamp(m/σ)‖_RMS`.
pub fn train<P, N>(oracle: &mut StochasticOracle<P>, config: &TrainConfig, noise: &mut N) -> Result<TrainRun>
where
    P: Objective,
    N: NoiseSource + ?Sized,
{
    if config.steps == 0 {
        return Err(Error::invalid("steps", "need at least one step"));
    }
    let d = oracle.base().dim();
    config.x1.check_len(d)?;
    let mut state = PracticalState::new(config.kind, config.x1.clone(), config.hyper)?;
    let mut columns: Vec<String> = ["lr", "loss", "snr_rms", "update_inf"].iter().map(|s| s.to_string()).collect();
    if config.record_iterates {
        columns.extend((0..d).map(|i| format!("x_{i}")));
    }
    let mut record = RunRecord::new(config.kind.id(), "t", columns);
    let mut snr = None;
    for t in 1..=config.steps {
        let lr = config.schedule.at(t);
        let loss = oracle.base().value(&state.x);
        let g = oracle.sample(&state.x);
        let before = state.x.clone();
        let info = state.step(&g, lr, noise)?;
        let metrics = snr_metrics(&info.numerator, &info.sigma)?;
        let moved = state.x.sub(&before)?.norms().linf;
        let mut values = vec![Some(lr), Some(loss), Some(metrics.rms_of_ratio), Some(moved)];
        if config.record_iterates {
            values.extend(before.iter().map(|&v| Some(v)));
        }
        record.push(t, values);
        snr = Some(metrics);
    }
    let final_snr = snr.expect("at least one step");
    record.push_summary("final_loss", oracle.base().value(&state.x));
    record.push_summary("final_snr_rms", final_snr.rms_of_ratio);
    record.push_summary("final_total_variance", final_snr.total_variance);
    for (q, level) in final_snr.quantiles.iter().zip(crate::sign::SNR_QUANTILE_LEVELS) {
        record.push_summary(format!("snr_q{:02}", (level * 100.0).round() as u32), *q);
    }
    Ok(TrainRun {
        record,
        final_state: state,
        final_snr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{FixedNoise, Recorder, Replay, RngStream};

    fn state(kind: OptimizerKind, x: &[f64]) -> PracticalState {
        PracticalState::new(
            kind,
            DenseVector::from_vec(x.to_vec()),
            Hyper {
                weight_decay: 0.0,
                ..kind.default_hyper()
            },
        )
        .unwrap()
    }

    #[test]
    fn stosign_first_step_zero_noise() {
        let mut s = state(OptimizerKind::StoSignSgd, &[0.0, 0.0, 0.0]);
        step_stosignsgd(&mut s, &[-3.0, 0.0, 2.0].into(), 0.1, &mut FixedNoise::zero()).unwrap();
        assert_eq!(s.m.as_slice(), &[-3.0, 0.0, 2.0]);
        assert_eq!(s.precond.as_slice(), &[3.0, 0.0, 2.0]);
        assert_eq!(s.x.as_slice(), &[0.1, 0.0, -0.1]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adamw_first_step() {
        let mut s = PracticalState::new(
            OptimizerKind::AdamW,
            [1.0].into(),
            Hyper {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.0,
            },
        )
        .unwrap();
        let info = step_adamw(&mut s, &[0.5].into(), 0.1).unwrap();
        assert!((s.m[0] - 0.05).abs() < 1e-15);
        assert!((s.precond[0] - 0.00025).abs() < 1e-15);
        assert!((info.numerator[0] - 0.5).abs() < 1e-15);
        // independent scalar recomputation
        let v_hat: f64 = 0.00025 / (1.0 - 0.999);
        let expect = 1.0 - 0.1 * 0.5 / (v_hat.sqrt() + 1e-8);
        assert!((s.x[0] - expect).abs() < 1e-12);
        assert!((s.x[0] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn adamw_constant_gradient_limit() {
        let mut s = state(OptimizerKind::AdamW, &[0.0]);
        let mut last = 0.0;
        for _ in 0..10_000 {
            let before = s.x[0];
            step_adamw(&mut s, &[0.5].into(), 0.01).unwrap();
            last = before - s.x[0];
        }
        assert!((last - 0.01 * 0.5 / (0.5 + 1e-8)).abs() < 1e-9);
    }

    #[test]
    fn adamax_buffer() {
        let mut s = state(OptimizerKind::AdaMax, &[0.0]);
        step_adamax(&mut s, &[0.5].into(), 0.1).unwrap();
        assert_eq!(s.precond[0], 0.5);
        step_adamax(&mut s, &[0.25].into(), 0.1).unwrap();
        assert!((s.precond[0] - 0.4995).abs() < 1e-15);
        let mut s = state(OptimizerKind::AdaMax, &[0.0]);
        for _ in 0..50 {
            step_adamax(&mut s, &[-0.7].into(), 0.1).unwrap();
            assert_eq!(s.precond[0], 0.7);
        }
    }

    #[test]
    fn signsgd_without_momentum() {
        let mut s = PracticalState::new(
            OptimizerKind::SignSgd,
            [0.5, 0.5, 0.5].into(),
            Hyper {
                beta1: 0.0,
                ..OptimizerKind::SignSgd.default_hyper()
            },
        )
        .unwrap();
        step_signsgd(&mut s, &[2.0, -0.1, 0.0].into(), 0.25).unwrap();
        assert_eq!(s.x.as_slice(), &[0.25, 0.75, 0.5]);
    }

    #[test]
    fn ie_first_step_is_sign_and_bounded() {
        let mut s = state(OptimizerKind::IeStoSignSgd, &[0.0, 0.0, 0.0]);
        let info = step_ie_stosignsgd(&mut s, &[-3.0, 0.0, 2.0].into(), 0.1).unwrap();
        assert_eq!(info.direction.as_slice(), &[-1.0, 0.0, 1.0]);
        let mut rng = RngStream::new(3, 0);
        for _ in 0..200 {
            let g = rng.uniform_sym(3).scaled(5.0);
            let info = step_ie_stosignsgd(&mut s, &g, 0.1).unwrap();
            assert!(info.direction.norms().linf <= 1.0);
            assert!(info.direction.norms().rms <= 1.0);
        }
    }

    #[test]
    fn v2_damps_toward_momentum() {
        let mut s = PracticalState::new(
            OptimizerKind::StoSignSgdV2,
            [0.0].into(),
            Hyper {
                beta1: 0.0,
                beta2: 0.5,
                eps: 0.0,
                weight_decay: 0.0,
            },
        )
        .unwrap();
        step_stosignsgd_v2(&mut s, &[8.0].into(), 0.1, &mut FixedNoise::zero()).unwrap();
        step_stosignsgd_v2(&mut s, &[1.0].into(), 0.1, &mut FixedNoise::zero()).unwrap();
        assert_eq!(s.precond[0], 4.0);
        step_stosignsgd_v2(&mut s, &[1.0].into(), 0.1, &mut FixedNoise::zero()).unwrap();
        assert_eq!(s.precond[0], 2.0);
        step_stosignsgd_v2(&mut s, &[1.0].into(), 0.1, &mut FixedNoise::zero()).unwrap();
        step_stosignsgd_v2(&mut s, &[1.0].into(), 0.1, &mut FixedNoise::zero()).unwrap();
        assert_eq!(s.precond[0], 1.0);
    }

    #[test]
    fn v2_with_unit_beta2_matches_stosign() {
        let mut a = state(OptimizerKind::StoSignSgd, &[0.3, -0.2]);
        let mut b = PracticalState::new(
            OptimizerKind::StoSignSgdV2,
            [0.3, -0.2].into(),
            Hyper {
                beta2: 1.0,
                ..a.hyper
            },
        )
        .unwrap();
        let mut ga = RngStream::new(11, 1);
        let (mut na, mut nb) = (RngStream::new(11, 2), RngStream::new(11, 2));
        for _ in 0..500 {
            let g = ga.uniform_sym(2);
            step_stosignsgd(&mut a, &g, 0.01, &mut na).unwrap();
            step_stosignsgd_v2(&mut b, &g, 0.01, &mut nb).unwrap();
            assert_eq!(a.x.as_slice(), b.x.as_slice());
            assert_eq!(a.precond.as_slice(), b.precond.as_slice());
        }
    }

    #[test]
    fn decay_isolated_with_zero_gradient() {
        // With eps > 0 the sign conversions still move by ±η on pure noise, so eps is 0 here.
        for kind in OptimizerKind::ALL {
            let mut s = PracticalState::new(
                kind,
                [1.0, -2.0].into(),
                Hyper {
                    weight_decay: 0.1,
                    eps: 0.0,
                    ..kind.default_hyper()
                },
            )
            .unwrap();
            let mut expect = [1.0, -2.0];
            for _ in 0..20 {
                s.step(&DenseVector::zeros(2), 0.5, &mut RngStream::new(0, 0)).unwrap();
                for e in expect.iter_mut() {
                    *e *= 1.0 - 0.5 * 0.1;
                }
            }
            for (a, b) in s.x.iter().zip(expect) {
                assert!((a - b).abs() < 1e-12, "{kind}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn saturated_coordinates_are_deterministic() {
        let num: DenseVector = [2.0, -3.0, 0.2].into();
        let sigma: DenseVector = [1.0, 1.0, 1.0].into();
        let mut rng = RngStream::new(9, 0);
        let mut sum = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let d = sign_direction(&num, &sigma, &mut rng).unwrap();
            assert_eq!((d[0], d[1]), (1.0, -1.0));
            sum += d[2];
        }
        assert!((sum / n as f64 - 0.2).abs() < 0.013);
    }

    #[test]
    fn recorded_noise_replays() {
        for kind in OptimizerKind::ALL {
            let mut a = state(kind, &[0.4, 0.1]);
            let mut b = a.clone();
            let mut rec = Recorder::new(RngStream::new(2, 7));
            let grads: Vec<DenseVector> = vec![[0.5, -1.0].into(), [0.25, 0.5].into(), [-1.0, 0.0].into()];
            for g in &grads {
                a.step(g, 0.1, &mut rec).unwrap();
            }
            let mut replay = Replay::new(rec.into_draws());
            for g in &grads {
                b.step(g, 0.1, &mut replay).unwrap();
            }
            assert_eq!(a, b);
            assert_eq!(replay.remaining(), 0);
        }
    }

    #[test]
    fn ids_round_trip() {
        for kind in OptimizerKind::ALL {
            assert_eq!(OptimizerKind::parse(kind.id()).unwrap(), kind);
        }
        assert!(OptimizerKind::parse("lion").is_err());
    }

    #[test]
    fn trick_table_rows() {
        let m = trick_matrix();
        assert_eq!(m.len(), 7);
        let get = |k| *m.iter().find(|r| r.kind == k).unwrap();
        let s = get(OptimizerKind::StoSignSgd);
        assert!(s.structural_noise && s.sigma_depends_on_m && s.inf_norm_on_sigma);
        let a = get(OptimizerKind::AdamW);
        assert!(!a.structural_noise && !a.sigma_depends_on_m && !a.inf_norm_on_sigma);
        let sm = get(OptimizerKind::SignAdaMax);
        assert!(sm.structural_noise && !sm.sigma_depends_on_m && sm.inf_norm_on_sigma);
    }

    #[test]
    fn schedules() {
        assert_eq!(LrSchedule::Constant(0.1).at(50), 0.1);
        assert_eq!(LrSchedule::InvSqrt(1.0).at(4), 0.5);
        let c = LrSchedule::Cosine { lr: 1.0, min_lr: 0.0, total: 11 };
        assert_eq!(c.at(1), 1.0);
        assert!((c.at(6) - 0.5).abs() < 1e-15);
        assert!(c.at(11).abs() < 1e-15);
        assert!(LrSchedule::parse("warmup", 0.1, 10).is_err());
    }

    #[test]
    fn wrong_tag_rejected() {
        let mut s = state(OptimizerKind::AdamW, &[0.0]);
        assert!(step_signsgd(&mut s, &[1.0].into(), 0.1).is_err());
        assert!(step_sign_converted(&mut s, &[1.0].into(), 0.1, &mut FixedNoise::zero()).is_err());
    }
}
