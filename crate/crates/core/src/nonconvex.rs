//! Online-to-nonconvex drivers built on the stochastic sign learner.
//!
//! The learner produces increments `Δ_t` inside `B_∞(0, D∞)`:
//!
//! ```text
//! Δ_t = Π^{G_{t-1}}[ Δ_{t-1} - η_{t-1} · S_{G_{t-1}}(g_{t-1}) ],   η_0 = 0
//! ```
//!
//! The exponential variant moves `x_t = x_{t-1} + s_t Δ_t` with `s_t ~ Exp(1)`
//! and queries the oracle at `x_t`. The uniform variant moves by the full `Δ_t`
//! and queries at the probe `w_t = x_{t-1} + s_t Δ_t` with `s_t ~ Unif[0, 1]`.
//! Iterates (or probes) are averaged over `K` blocks of length `N` and one block
//! average is returned uniformly at random.

use crate::error::{Error, Result};
use crate::geometry::{project_weighted, BoxDomain};
use crate::math::{elementwise_max, DenseVector, NoiseSource};
use crate::problems::{Objective, StochasticOracle};
use crate::record::RunRecord;
use crate::sign::stochastic_sign;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    Exponential,
    Uniform,
}

impl Scaling {
    pub fn parse(s: &str) -> Result<Scaling> {
        match s {
            "exp" | "exponential" => Ok(Scaling::Exponential),
            "uniform" | "unif" => Ok(Scaling::Uniform),
            other => Err(Error::UnknownId {
                kind: "scaling variant",
                id: other.to_string(),
            }),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Scaling::Exponential => "exp",
            Scaling::Uniform => "uniform",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `base / sqrt(((t - 1) mod N) + 1)`: restarts every block.
    BlockRestart { base: f64 },
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleParams {
    pub k: u64,
    pub n: u64,
    pub d_inf: f64,
    pub step_rule: StepRule,
    pub scaling: Scaling,
    /// Radius used by the stationarity surrogates.
    pub delta: f64,
    /// False for user-chosen `(K, N, D∞)`.
    pub on_schedule: bool,
}

impl ScheduleParams {
    /// Off-schedule parameters with the variant's usual step rule.
    pub fn relaxed(scaling: Scaling, k: u64, n: u64, d_inf: f64, delta: f64) -> Result<Self> {
        let step_rule = match scaling {
            Scaling::Exponential => StepRule::BlockRestart {
                base: std::f64::consts::SQRT_2 * d_inf,
            },
            Scaling::Uniform => StepRule::Constant(2.0 * d_inf / (n as f64).sqrt()),
        };
        let p = ScheduleParams {
            k,
            n,
            d_inf,
            step_rule,
            scaling,
            delta,
            on_schedule: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::invalid("K, N", "block count and length must be at least 1"));
        }
        if !(self.d_inf > 0.0 && self.d_inf.is_finite()) {
            return Err(Error::invalid("d_inf", format!("{} must be positive", self.d_inf)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::invalid("delta", format!("{} must be non-negative", self.delta)));
        }
        Ok(())
    }

    /// `T = K N`.
    pub fn horizon(&self) -> u128 {
        u128::from(self.k) * u128::from(self.n)
    }

    /// Refuses horizons above `cap` unless overridden.
    pub fn check_guardrail(&self, cap: u64, override_guardrail: bool) -> Result<()> {
        if !override_guardrail && self.horizon() > u128::from(cap) {
            return Err(Error::Guardrail {
                horizon: self.horizon(),
                cap,
            });
        }
        Ok(())
    }

    /// `η_t` for `t >= 1`.
    pub fn eta(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match self.step_rule {
            StepRule::BlockRestart { base } => base / ((((t - 1) % self.n) + 1) as f64).sqrt(),
            StepRule::Constant(eta) => eta,
        }
    }
}

/// Default guardrail cap on `T`.
pub const GUARDRAIL_CAP: u64 = 10_000_000;

/// Multipliers in the exponential-scaling schedule:
/// `K = ⌈k_coeff Δf δ^{1/2} / ε^{3/2}⌉`, `N = ⌈n_coeff ‖L‖₁² / ε²⌉`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpConstants {
    pub k_coeff: f64,
    pub n_coeff: f64,
}

impl ExpConstants {
    /// Constants of the stated theorem: `7√14/2` and `751`.
    pub fn theorem() -> Self {
        ExpConstants {
            k_coeff: 7.0 * 14f64.sqrt() / 2.0,
            n_coeff: 751.0,
        }
    }

    /// The smaller `N` multiplier the proof actually needs: `49(33 + 20√2)/16`.
    pub fn proof() -> Self {
        ExpConstants {
            n_coeff: 49.0 * (33.0 + 20.0 * std::f64::consts::SQRT_2) / 16.0,
            ..ExpConstants::theorem()
        }
    }
}

/// Multipliers in the uniform-scaling schedule:
/// `K = ⌈k_coeff Δf / (ε δ)⌉`, `N = ⌈n_coeff ‖L‖₁² / ε²⌉`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformConstants {
    pub k_coeff: f64,
    pub n_coeff: f64,
}

impl UniformConstants {
    /// `3` and `81/4`.
    pub fn theorem() -> Self {
        UniformConstants {
            k_coeff: 3.0,
            n_coeff: 81.0 / 4.0,
        }
    }

    /// `N` multiplier `441/4` from the proof's last step.
    pub fn proof() -> Self {
        UniformConstants {
            n_coeff: 441.0 / 4.0,
            ..UniformConstants::theorem()
        }
    }
}

/// Ceiling that absorbs last-bit rounding, so `751 / 0.1²` gives 75100 rather
/// than 75101 when the quotient lands a few ulps above an integer.
fn ceil_count(v: f64, name: &'static str) -> Result<u64> {
    if !v.is_finite() || v > u64::MAX as f64 {
        return Err(Error::invalid(name, format!("schedule value {v} is out of range")));
    }
    let r = v.round();
    let c = if (v - r).abs() <= 1e-12 * r.abs().max(1.0) { r } else { v.ceil() };
    Ok((c as u64).max(1))
}

fn check_positive(vals: &[(&'static str, f64)]) -> Result<()> {
    for &(name, v) in vals {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("{v} must be positive")));
        }
    }
    Ok(())
}

pub fn schedule_exponential(delta_f: f64, delta: f64, eps: f64, l1: f64) -> Result<ScheduleParams> {
    schedule_exponential_with(delta_f, delta, eps, l1, ExpConstants::theorem())
}

pub fn schedule_exponential_with(delta_f: f64, delta: f64, eps: f64, l1: f64, c: ExpConstants) -> Result<ScheduleParams> {
    check_positive(&[("delta_f", delta_f), ("delta", delta), ("eps", eps), ("l1", l1)])?;
    let k = ceil_count(c.k_coeff * delta_f * delta.sqrt() / eps.powf(1.5), "K")?;
    let n = ceil_count(c.n_coeff * l1 * l1 / (eps * eps), "N")?;
    let d_inf = eps.sqrt() / ((14.0 * delta).sqrt() * n as f64);
    Ok(ScheduleParams {
        k,
        n,
        d_inf,
        step_rule: StepRule::BlockRestart {
            base: std::f64::consts::SQRT_2 * d_inf,
        },
        scaling: Scaling::Exponential,
        delta,
        on_schedule: true,
    })
}

pub fn schedule_uniform(delta_f: f64, delta: f64, eps: f64, l1: f64) -> Result<ScheduleParams> {
    schedule_uniform_with(delta_f, delta, eps, l1, UniformConstants::theorem())
}

pub fn schedule_uniform_with(delta_f: f64, delta: f64, eps: f64, l1: f64, c: UniformConstants) -> Result<ScheduleParams> {
    check_positive(&[("delta_f", delta_f), ("delta", delta), ("eps", eps), ("l1", l1)])?;
    let k = ceil_count(c.k_coeff * delta_f / (eps * delta), "K")?;
    let n = ceil_count(c.n_coeff * l1 * l1 / (eps * eps), "N")?;
    let d_inf = delta / n as f64;
    Ok(ScheduleParams {
        k,
        n,
        d_inf,
        step_rule: StepRule::Constant(2.0 * d_inf / (n as f64).sqrt()),
        scaling: Scaling::Uniform,
        delta,
        on_schedule: true,
    })
}

fn window_centroid(window: &[DenseVector], grads: &[DenseVector]) -> Result<DenseVector> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if grads.len() != window.len() {
        return Err(Error::DimensionMismatch {
            expected: window.len(),
            found: grads.len(),
        });
    }
    DenseVector::mean_of(window)
}

/// `‖mean(grads)‖₁ + δ · mean_n ‖p_n - p̄‖∞²`.
pub fn stationarity_surrogate_l1inf(window: &[DenseVector], grads: &[DenseVector], delta: f64) -> Result<f64> {
    let centroid = window_centroid(window, grads)?;
    let g = DenseVector::mean_of(grads)?;
    let mut spread = 0.0;
    for p in window {
        let r = p.sub(&centroid)?.norms().linf;
        spread += r * r;
    }
    Ok(g.norms().l1 + delta * spread / window.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldsteinSurrogate {
    /// `‖mean(grads)‖₁`.
    pub value: f64,
    /// `max_n ‖w_n - w̄‖∞`.
    pub radius: f64,
    pub radius_ok: bool,
}

pub fn goldstein_surrogate(window: &[DenseVector], grads: &[DenseVector], delta: f64) -> Result<GoldsteinSurrogate> {
    let centroid = window_centroid(window, grads)?;
    let value = DenseVector::mean_of(grads)?.norms().l1;
    let mut radius = 0.0_f64;
    for p in window {
        radius = radius.max(p.sub(&centroid)?.norms().linf);
    }
    Ok(GoldsteinSurrogate {
        value,
        radius,
        radius_ok: radius <= delta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockAverages {
    /// `x̄^k` (or `w̄^k`) for `k = 1..K`, stored zero-based.
    pub means: Vec<DenseVector>,
    /// Zero-based index of the sampled output block.
    pub output_index: usize,
}

impl BlockAverages {
    pub fn output(&self) -> &DenseVector {
        &self.means[self.output_index]
    }
}

/// Full state after step `t`, kept only when tracing is on.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub t: u64,
    pub delta: DenseVector,
    pub s: f64,
    pub x: DenseVector,
    /// Where the oracle was queried: `x_t` or `w_t`.
    pub query: DenseVector,
    pub g: DenseVector,
    pub g_max: DenseVector,
}

#[derive(Clone, Debug, Default)]
pub struct NonconvexOptions {
    /// Initial increment; zero when `None`.
    pub delta0: Option<DenseVector>,
    /// Keep every [`TraceStep`].
    pub trace: bool,
    /// Emit `x_i` columns in the record.
    pub record_iterates: bool,
}

#[derive(Clone, Debug)]
pub struct BlockSummary {
    pub k: u64,
    pub l1inf: f64,
    pub goldstein: GoldsteinSurrogate,
}

#[derive(Clone, Debug)]
pub struct NonconvexRun {
    pub scaling: Scaling,
    pub averages: BlockAverages,
    pub blocks: Vec<BlockSummary>,
    pub final_x: DenseVector,
    pub final_g_max: DenseVector,
    pub record: RunRecord,
    pub trace: Vec<TraceStep>,
}

impl NonconvexRun {
    /// Smallest per-block surrogate of the variant's own stationarity notion.
    pub fn best_surrogate(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| self.variant_surrogate(b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn first_surrogate(&self) -> f64 {
        self.variant_surrogate(&self.blocks[0])
    }

    fn variant_surrogate(&self, b: &BlockSummary) -> f64 {
        match self.scaling {
            Scaling::Uniform => b.goldstein.value,
            Scaling::Exponential => b.l1inf,
        }
    }

    pub fn all_radii_ok(&self) -> bool {
        self.blocks.iter().all(|b| b.goldstein.radius_ok)
    }
}

/// Exponential random scaling: oracle queried at `x_t = x_{t-1} + s_t Δ_t`.
pub fn run_exponential<P, N>(
    oracle: &mut StochasticOracle<P>,
    x0: &DenseVector,
    params: &ScheduleParams,
    opts: &NonconvexOptions,
    noise: &mut N,
) -> Result<NonconvexRun>
where
    P: Objective,
    N: NoiseSource + ?Sized,
{
    if params.scaling != Scaling::Exponential {
        return Err(Error::invalid("scaling", "run_exponential needs exponential-scaling parameters"));
    }
    drive(oracle, x0, params, opts, noise)
}

/// Uniform random scaling: oracle queried at `w_t = x_{t-1} + s_t Δ_t`.
pub fn run_uniform<P, N>(
    oracle: &mut StochasticOracle<P>,
    x0: &DenseVector,
    params: &ScheduleParams,
    opts: &NonconvexOptions,
    noise: &mut N,
) -> Result<NonconvexRun>
where
    P: Objective,
    N: NoiseSource + ?Sized,
{
    if params.scaling != Scaling::Uniform {
        return Err(Error::invalid("scaling", "run_uniform needs uniform-scaling parameters"));
    }
    drive(oracle, x0, params, opts, noise)
}

fn drive<P, N>(
    oracle: &mut StochasticOracle<P>,
    x0: &DenseVector,
    params: &ScheduleParams,
    opts: &NonconvexOptions,
    noise: &mut N,
) -> Result<NonconvexRun>
where
    P: Objective,
    N: NoiseSource + ?Sized,
{
    params.validate()?;
    let d = oracle.base().dim();
    x0.check_len(d)?;
    let ball = BoxDomain::linf_ball(&DenseVector::zeros(d), params.d_inf)?;
    let mut delta = opts.delta0.clone().unwrap_or_else(|| DenseVector::zeros(d));
    delta.check_len(d)?;
    if !ball.contains(&delta) {
        return Err(Error::invalid("delta0", format!("Δ_0 must lie in B_∞(0, {})", params.d_inf)));
    }
    let uniform = params.scaling == Scaling::Uniform;

    let mut columns: Vec<String> = ["block_k", "s_t", "eta", "loss", "G_l1", "delta_inf", "surrogate_per_block"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if uniform {
        columns.push("radius_ok".into());
    }
    if opts.record_iterates {
        columns.extend((0..d).map(|i| format!("x_{i}")));
    }
    let mut record = RunRecord::new(params.scaling.id(), "t", columns);

    let mut x = x0.clone();
    let mut g_max = DenseVector::zeros(d);
    let mut g_prev: Option<DenseVector> = None;
    let mut window: Vec<DenseVector> = Vec::with_capacity(params.n as usize);
    let mut window_grads: Vec<DenseVector> = Vec::with_capacity(params.n as usize);
    let mut means = Vec::with_capacity(params.k as usize);
    let mut blocks = Vec::with_capacity(params.k as usize);
    let mut trace = Vec::new();
    let horizon = params.k * params.n;

    for t in 1..=horizon {
        // Δ_t reads g_{t-1}, G_{t-1}, η_{t-1}; at t = 1 the term vanishes.
        if let Some(g) = &g_prev {
            let eta_prev = params.eta(t - 1);
            let s = stochastic_sign(g, &g_max, noise)?;
            let proposal: DenseVector = delta
                .iter()
                .zip(s.iter())
                .map(|(&v, &s)| v - eta_prev * f64::from(s))
                .collect();
            delta = project_weighted(&proposal, &g_max, &ball)?;
        }
        let (s_t, query) = if uniform {
            let s_t = noise.unit();
            let w = x.zip_map(&delta, |a, b| a + s_t * b)?;
            x = x.add(&delta)?;
            (s_t, w)
        } else {
            let s_t = noise.exp1();
            x = x.zip_map(&delta, |a, b| a + s_t * b)?;
            (s_t, x.clone())
        };
        let g = oracle.sample(&query);
        g.check_len(d)?;
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index, value: g[index] });
        }
        g_max = elementwise_max(&g_max, &g.abs())?;

        window_grads.push(oracle.base().subgradient(&query));
        window.push(query.clone());
        let block_k = (t - 1) / params.n + 1;
        let mut surrogate = None;
        let mut radius_ok = None;
        if t % params.n == 0 {
            let l1inf = stationarity_surrogate_l1inf(&window, &window_grads, params.delta)?;
            let gs = goldstein_surrogate(&window, &window_grads, params.delta)?;
            surrogate = Some(if uniform { gs.value } else { l1inf });
            radius_ok = Some(if gs.radius_ok { 1.0 } else { 0.0 });
            means.push(DenseVector::mean_of(&window)?);
            blocks.push(BlockSummary {
                k: block_k,
                l1inf,
                goldstein: gs,
            });
            window.clear();
            window_grads.clear();
        }

        let mut values = vec![
            Some(block_k as f64),
            Some(s_t),
            Some(params.eta(t)),
            Some(oracle.base().value(&query)),
            Some(g_max.norms().l1),
            Some(delta.norms().linf),
            surrogate,
        ];
        if uniform {
            values.push(radius_ok);
        }
        if opts.record_iterates {
            values.extend(query.iter().map(|&v| Some(v)));
        }
        record.push(t, values);

        if opts.trace {
            trace.push(TraceStep {
                t,
                delta: delta.clone(),
                s: s_t,
                x: x.clone(),
                query,
                g: g.clone(),
                g_max: g_max.clone(),
            });
        }
        g_prev = Some(g);
    }

    let output_index = noise.index(means.len());
    let averages = BlockAverages { means, output_index };
    record.push_summary("K", params.k as f64);
    record.push_summary("N", params.n as f64);
    record.push_summary("d_inf", params.d_inf);
    record.push_summary("on_schedule", if params.on_schedule { 1.0 } else { 0.0 });
    record.push_summary("uniform", if uniform { 1.0 } else { 0.0 });
    record.push_summary("output_block", output_index as f64 + 1.0);
    record.push_summary("output_loss", oracle.base().value(averages.output()));
    let mut run = NonconvexRun {
        scaling: params.scaling,
        averages,
        blocks,
        final_x: x,
        final_g_max: g_max,
        record,
        trace,
    };
    let (best, first) = (run.best_surrogate(), run.first_surrogate());
    run.record.push_summary("best_surrogate", best);
    run.record.push_summary("first_surrogate", first);
    Ok(run)
}
