//! Objectives, noisy gradient oracles and linear adversaries.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::BoxDomain;
use crate::math::{DenseVector, NoiseSource, RngStream};
use crate::sign::sign_scalar;

/// A (sub)differentiable objective with declared coordinate-wise gradient bounds.
pub trait Objective: Send + Sync {
    fn id(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn value(&self, x: &DenseVector) -> f64;
    fn subgradient(&self, x: &DenseVector) -> DenseVector;
    /// `L` with `|g_i| <= L_i` for every returned subgradient.
    fn lipschitz(&self) -> DenseVector;
    fn lower_bound(&self) -> Option<f64>;
    /// Euclidean distance from `x` to the set where the objective is not differentiable.
    fn kink_distance(&self, x: &DenseVector) -> f64;
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn id(&self) -> &'static str {
        (**self).id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DenseVector) -> f64 {
        (**self).value(x)
    }
    fn subgradient(&self, x: &DenseVector) -> DenseVector {
        (**self).subgradient(x)
    }
    fn lipschitz(&self) -> DenseVector {
        (**self).lipschitz()
    }
    fn lower_bound(&self) -> Option<f64> {
        (**self).lower_bound()
    }
    fn kink_distance(&self, x: &DenseVector) -> f64 {
        (**self).kink_distance(x)
    }
}

/// `f(x1, x2) = |x1 + x2| + 2 |x1 - x2|`: convex, non-smooth, minimized at the origin.
///
/// Away from the kinks deterministic SignSGD moves along `±(1, -1)`, so
/// `x1 + x2` never changes and the iterates cannot reach the minimizer.
#[derive(Clone, Copy, Debug, Default)]
pub struct Fig1Objective;

pub fn fig1_objective() -> Fig1Objective {
    Fig1Objective
}

impl Objective for Fig1Objective {
    fn id(&self) -> &'static str {
        "fig1"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &DenseVector) -> f64 {
        (x[0] + x[1]).abs() + 2.0 * (x[0] - x[1]).abs()
    }

    fn subgradient(&self, x: &DenseVector) -> DenseVector {
        let a = f64::from(sign_scalar(x[0] + x[1]));
        let b = 2.0 * f64::from(sign_scalar(x[0] - x[1]));
        [a + b, a - b].into()
    }

    fn lipschitz(&self) -> DenseVector {
        [3.0, 3.0].into()
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn kink_distance(&self, x: &DenseVector) -> f64 {
        (x[0] + x[1]).abs().min((x[0] - x[1]).abs()) / std::f64::consts::SQRT_2
    }
}

/// Deterministic SignSGD on [`fig1_objective`] with `η_t = D∞/√(2t)`, no
/// projection, carried out with 256-bit floats.
///
/// Near-collisions of `x₁` and `x₂` reach ~1e-22 within 1e4 steps, so an
/// `f64` run rounds onto the kink and stops conserving `x₁ + x₂`.
#[derive(Clone, Debug)]
pub struct Fig1SignTrace {
    /// `x_1, …, x_T` rounded to `f64`.
    pub iterates: Vec<[f64; 2]>,
    pub losses: Vec<f64>,
    pub max_sum_drift: f64,
    pub min_gap: f64,
    /// First `t` at which `x₁ = x₂` or `x₁ + x₂ = 0` exactly.
    pub kink_step: Option<usize>,
}

pub fn fig1_signsgd_extended(x0: [f64; 2], horizon: usize, d_inf: f64) -> Fig1SignTrace {
    use astro_float::{BigFloat, RoundingMode};
    const P: usize = 256;
    let rm = RoundingMode::ToEven;
    let sgn = |v: &BigFloat| -> f64 {
        if v.is_zero() {
            0.0
        } else if v.is_positive() {
            1.0
        } else {
            -1.0
        }
    };
    let to_f64 = |v: &BigFloat| -> f64 {
        if v.is_zero() {
            0.0
        } else {
            v.to_string().parse().expect("finite decimal")
        }
    };
    let (mut x1, mut x2) = (BigFloat::from_f64(x0[0], P), BigFloat::from_f64(x0[1], P));
    let sum0 = x1.add(&x2, P, rm);
    let d_inf = BigFloat::from_f64(d_inf, P);
    let mut trace = Fig1SignTrace {
        iterates: Vec::with_capacity(horizon),
        losses: Vec::with_capacity(horizon),
        max_sum_drift: 0.0,
        min_gap: f64::INFINITY,
        kink_step: None,
    };
    for t in 1..=horizon {
        let (sum, diff) = (x1.add(&x2, P, rm), x1.sub(&x2, P, rm));
        let (a, b) = (sgn(&sum), 2.0 * sgn(&diff));
        let loss = sum.abs().add(&diff.abs().mul(&BigFloat::from_f64(2.0, P), P, rm), P, rm);
        trace.iterates.push([to_f64(&x1), to_f64(&x2)]);
        trace.losses.push(to_f64(&loss));
        trace.max_sum_drift = trace.max_sum_drift.max(to_f64(&sum.sub(&sum0, P, rm).abs()));
        trace.min_gap = trace.min_gap.min(to_f64(&diff.abs()));
        if trace.kink_step.is_none() && (a == 0.0 || b == 0.0) {
            trace.kink_step = Some(t);
        }
        let eta = d_inf.div(&BigFloat::from_f64(2.0 * t as f64, P).sqrt(P, rm), P, rm);
        let step = |x: BigFloat, dir: f64| {
            if dir > 0.0 {
                x.sub(&eta, P, rm)
            } else if dir < 0.0 {
                x.add(&eta, P, rm)
            } else {
                x
            }
        };
        x1 = step(x1, sign_f64(a + b));
        x2 = step(x2, sign_f64(a - b));
    }
    trace
}

fn sign_f64(v: f64) -> f64 {
    f64::from(sign_scalar(v))
}

/// `f(x) = Σ |x_i| / (1 + |x_i|)`: bounded below by 0, non-convex,
/// differentiable away from the coordinate hyperplanes, `L_i = 1`.
#[derive(Clone, Copy, Debug)]
pub struct ToyNonconvex {
    dim: usize,
}

pub fn toy_nonconvex(d: usize) -> Result<ToyNonconvex> {
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    Ok(ToyNonconvex { dim: d })
}

impl Objective for ToyNonconvex {
    fn id(&self) -> &'static str {
        "toy-nonconvex"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DenseVector) -> f64 {
        x.iter().map(|v| v.abs() / (1.0 + v.abs())).sum()
    }

    fn subgradient(&self, x: &DenseVector) -> DenseVector {
        x.map(|v| f64::from(sign_scalar(v)) / ((1.0 + v.abs()) * (1.0 + v.abs())))
    }

    fn lipschitz(&self) -> DenseVector {
        DenseVector::filled(self.dim, 1.0)
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn kink_distance(&self, x: &DenseVector) -> f64 {
        x.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

/// Resolves a config id to an objective. `d` is ignored by fixed-dimension problems.
pub fn objective_by_id(id: &str, d: usize) -> Result<Box<dyn Objective>> {
    match id {
        "fig1" => Ok(Box::new(Fig1Objective)),
        "toy-nonconvex" => Ok(Box::new(toy_nonconvex(d)?)),
        _ => Err(Error::UnknownId {
            kind: "problem",
            id: id.to_string(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    None,
    /// Adds `a_i · u_i` with `u_i ~ Unif[-1, 1]`.
    BoundedUniform(DenseVector),
}

/// Unbiased stochastic first-order oracle around a base objective.
pub struct StochasticOracle<P> {
    base: P,
    noise: NoiseModel,
    rng: RngStream,
}

impl<P: Objective> StochasticOracle<P> {
    pub fn new(base: P, noise: NoiseModel, rng: RngStream) -> Result<Self> {
        if let NoiseModel::BoundedUniform(amp) = &noise {
            amp.check_len(base.dim())?;
            if let Some(coord) = amp.iter().position(|&a| !(a >= 0.0 && a.is_finite())) {
                return Err(Error::Precondition {
                    coord,
                    detail: format!("noise amplitude {} must be finite and non-negative", amp[coord]),
                });
            }
        }
        Ok(StochasticOracle { base, noise, rng })
    }

    pub fn exact(base: P) -> Self {
        StochasticOracle {
            base,
            noise: NoiseModel::None,
            rng: RngStream::new(0, 0),
        }
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn sample(&mut self, x: &DenseVector) -> DenseVector {
        let mut g = self.base.subgradient(x);
        if let NoiseModel::BoundedUniform(amp) = &self.noise {
            let u = self.rng.uniform_sym(g.len());
            for i in 0..g.len() {
                g[i] += amp[i] * u[i];
            }
        }
        g
    }

    /// Clean bound plus noise amplitude.
    pub fn lipschitz(&self) -> DenseVector {
        let clean = self.base.lipschitz();
        match &self.noise {
            NoiseModel::None => clean,
            NoiseModel::BoundedUniform(amp) => clean.add(amp).expect("checked at construction"),
        }
    }
}

impl<P: fmt::Debug> fmt::Debug for StochasticOracle<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticOracle")
            .field("base", &self.base)
            .field("noise", &self.noise)
            .finish_non_exhaustive()
    }
}

/// Linear losses `f_t(x) = <g_t, x>` with `|g_{t,i}| <= L_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversarySequence {
    losses: Vec<DenseVector>,
    bound: DenseVector,
}

impl AdversarySequence {
    pub fn new(losses: Vec<DenseVector>, bound: DenseVector) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::invalid("horizon", "at least one round is required"));
        }
        for g in &losses {
            g.check_len(bound.len())?;
            for (coord, (gi, li)) in g.iter().zip(bound.iter()).enumerate() {
                if gi.abs() > *li {
                    return Err(Error::Precondition {
                        coord,
                        detail: format!("|g| = {} exceeds bound {li}", gi.abs()),
                    });
                }
            }
        }
        Ok(AdversarySequence { losses, bound })
    }

    pub fn horizon(&self) -> usize {
        self.losses.len()
    }

    pub fn dim(&self) -> usize {
        self.bound.len()
    }

    pub fn bound(&self) -> &DenseVector {
        &self.bound
    }

    pub fn losses(&self) -> &[DenseVector] {
        &self.losses
    }

    /// Loss vector of round `t` (1-based).
    pub fn round(&self, t: usize) -> &DenseVector {
        &self.losses[t - 1]
    }
}

/// `g_{t,i} = L_i ε_{t,i}` with i.i.d. Rademacher `ε`.
pub fn rademacher_adversary(rng: &mut RngStream, horizon: usize, d: usize, bound: &DenseVector) -> Result<AdversarySequence> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "T must be at least 1"));
    }
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    bound.check_len(d)?;
    let losses = (0..horizon)
        .map(|_| rng.rademacher(d).zip_map(bound, |e, l| e * l).expect("lengths checked"))
        .collect();
    AdversarySequence::new(losses, bound.clone())
}

/// `min_{x in box} <s, x>`, attained at `lo_i` where `s_i > 0` and `hi_i` otherwise.
pub fn min_linear_over_box(s: &DenseVector, domain: &BoxDomain) -> f64 {
    s.iter()
        .zip(domain.lo().iter().zip(domain.hi().iter()))
        .map(|(&si, (&l, &h))| if si > 0.0 { si * l } else { si * h })
        .sum()
}

/// `Σ_t <g_t, x_t> - min_{x in box} <Σ_t g_t, x>`.
pub fn best_fixed_regret(seq: &AdversarySequence, iterates: &[DenseVector], domain: &BoxDomain) -> Result<f64> {
    if iterates.len() != seq.horizon() {
        return Err(Error::DimensionMismatch {
            expected: seq.horizon(),
            found: iterates.len(),
        });
    }
    let mut tracker = RegretTracker::new(domain.clone(), None)?;
    for (g, x) in seq.losses.iter().zip(iterates) {
        tracker.observe(g, x)?;
    }
    Ok(tracker.max_regret())
}

/// Running regret of a learner on linear losses.
#[derive(Clone, Debug)]
pub struct RegretTracker {
    domain: BoxDomain,
    comparator: DenseVector,
    learner_loss: f64,
    grad_sum: DenseVector,
}

impl RegretTracker {
    /// `comparator` defaults to the box center.
    pub fn new(domain: BoxDomain, comparator: Option<DenseVector>) -> Result<Self> {
        let comparator = comparator.unwrap_or_else(|| domain.center());
        comparator.check_len(domain.dim())?;
        Ok(RegretTracker {
            grad_sum: DenseVector::zeros(domain.dim()),
            domain,
            comparator,
            learner_loss: 0.0,
        })
    }

    pub fn observe(&mut self, g: &DenseVector, x: &DenseVector) -> Result<()> {
        self.learner_loss += g.dot(x)?;
        self.grad_sum = self.grad_sum.add(g)?;
        Ok(())
    }

    pub fn learner_loss(&self) -> f64 {
        self.learner_loss
    }

    /// Regret against the fixed comparator.
    pub fn regret(&self) -> f64 {
        self.learner_loss - self.grad_sum.dot(&self.comparator).expect("lengths checked")
    }

    /// Regret against the best point of the box in hindsight.
    pub fn max_regret(&self) -> f64 {
        self.learner_loss - min_linear_over_box(&self.grad_sum, &self.domain)
    }
}

/// Largest `T · d` accepted by [`exhaustive_expected_max_regret`].
pub const EXHAUSTIVE_CAP: usize = 24;

fn check_fixed_learner(horizon: usize, domain: &BoxDomain, bound: &DenseVector, learner: &DenseVector) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "T must be at least 1"));
    }
    bound.check_len(domain.dim())?;
    learner.check_len(domain.dim())?;
    if !domain.contains(learner) {
        return Err(Error::invalid("learner", "fixed learner must lie in the box"));
    }
    Ok(())
}

/// Expected max-regret of a learner that always plays `learner`, averaged
/// exactly over all `2^{T d}` sequences with `g_{t,i} = ±L_i`.
pub fn exhaustive_expected_max_regret(
    horizon: usize,
    domain: &BoxDomain,
    bound: &DenseVector,
    learner: &DenseVector,
) -> Result<f64> {
    check_fixed_learner(horizon, domain, bound, learner)?;
    let d = domain.dim();
    let bits = horizon * d;
    if bits > EXHAUSTIVE_CAP {
        return Err(Error::invalid(
            "horizon",
            format!("T·d = {bits} exceeds the enumeration cap of {EXHAUSTIVE_CAP}"),
        ));
    }
    let count = 1u64 << bits;
    let mut total = 0.0;
    let mut sum = DenseVector::zeros(d);
    for mask in 0..count {
        for i in 0..d {
            let mut acc = 0.0;
            for t in 0..horizon {
                let bit = mask >> (t * d + i) & 1;
                acc += if bit == 1 { bound[i] } else { -bound[i] };
            }
            sum[i] = acc;
        }
        total += sum.dot(learner)? - min_linear_over_box(&sum, domain);
    }
    Ok(total / count as f64)
}

/// Monte-Carlo counterpart of [`exhaustive_expected_max_regret`]: one max-regret value per sampled sequence.
pub fn sampled_max_regret(
    rng: &mut RngStream,
    horizon: usize,
    domain: &BoxDomain,
    bound: &DenseVector,
    learner: &DenseVector,
    samples: usize,
) -> Result<Vec<f64>> {
    check_fixed_learner(horizon, domain, bound, learner)?;
    let iterates = vec![learner.clone(); horizon];
    (0..samples)
        .map(|_| {
            let seq = rademacher_adversary(rng, horizon, domain.dim(), bound)?;
            best_fixed_regret(&seq, &iterates, domain)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_extended_signsgd_conserves_sum() {
        let tr = fig1_signsgd_extended([0.8, 0.2], 10_000, 2.0);
        assert_eq!(tr.kink_step, None);
        assert!(tr.max_sum_drift < 1e-60);
        assert!(tr.losses.iter().all(|&f| f >= 1.0));
        // 80-digit mpmath run of the same recursion: min |x1 - x2| = 7.9269016815554584e-23 at t = 8515.
        assert!((tr.min_gap / 7.926_901_681_555_458e-23 - 1.0).abs() < 1e-9, "{}", tr.min_gap);
        let d = tr.iterates[8514];
        assert_eq!(d[0], d[1], "indistinguishable in f64");
    }

    fn central_diff(f: &dyn Objective, x: &DenseVector, h: f64) -> DenseVector {
        (0..x.len())
            .map(|i| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                (f.value(&a) - f.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn fig1_values() {
        let f = fig1_objective();
        assert_eq!(f.value(&[0.0, 0.0].into()), 0.0);
        assert_eq!(f.value(&[1.0, 0.0].into()), 3.0);
        assert_eq!(f.subgradient(&[1.0, 0.0].into()).as_slice(), &[3.0, -1.0]);
        assert!((f.value(&[0.8, 0.2].into()) - 2.2).abs() < 1e-15);
        let fd = central_diff(&f, &[1.0, 0.0].into(), 1e-6);
        assert!((fd[0] - 3.0).abs() < 1e-6 && (fd[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn toy_values() {
        let f = toy_nonconvex(1).unwrap();
        assert_eq!(f.value(&[0.0].into()), 0.0);
        assert_eq!(f.value(&[1.0].into()), 0.5);
        assert_eq!(f.subgradient(&[1.0].into())[0], 0.25);
        assert!((central_diff(&f, &[1.0].into(), 1e-6)[0] - 0.25).abs() < 1e-6);
        assert!(toy_nonconvex(0).is_err());
    }

    #[test]
    fn subgradients_match_finite_differences() {
        let mut rng = RngStream::new(99, 0);
        let problems: Vec<Box<dyn Objective>> = vec![Box::new(fig1_objective()), Box::new(toy_nonconvex(4).unwrap())];
        for f in &problems {
            let mut checked = 0;
            while checked < 100 {
                let x = rng.uniform_sym(f.dim()).scaled(2.0);
                if f.kink_distance(&x) <= 1e-3 {
                    continue;
                }
                let g = f.subgradient(&x);
                let fd = central_diff(f.as_ref(), &x, 1e-6);
                for i in 0..x.len() {
                    assert!((g[i] - fd[i]).abs() < 1e-4, "{} at {:?}", f.id(), x);
                    assert!(g[i].abs() <= f.lipschitz()[i]);
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn oracle_noise_is_mean_zero_and_bounded() {
        let amp: DenseVector = [0.5, 1.0, 0.25].into();
        let mut oracle = StochasticOracle::new(
            toy_nonconvex(3).unwrap(),
            NoiseModel::BoundedUniform(amp.clone()),
            RngStream::new(4, 0),
        )
        .unwrap();
        let x: DenseVector = [0.3, -1.2, 2.0].into();
        let clean = oracle.base().subgradient(&x);
        let bound = oracle.lipschitz();
        let n = 10_000;
        let mut sum = DenseVector::zeros(3);
        for _ in 0..n {
            let g = oracle.sample(&x);
            for i in 0..3 {
                assert!(g[i].abs() <= bound[i]);
            }
            sum = sum.add(&g).unwrap();
        }
        for i in 0..3 {
            // stderr of a_i·Unif[-1,1] is a_i/sqrt(3n)
            let se = amp[i] / (3.0 * n as f64).sqrt();
            assert!((sum[i] / n as f64 - clean[i]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn adversary_construction() {
        let l: DenseVector = [1.0, 2.0].into();
        let a = rademacher_adversary(&mut RngStream::new(1, 0), 50, 2, &l).unwrap();
        for g in a.losses() {
            assert_eq!(g.abs(), l);
        }
        let b = rademacher_adversary(&mut RngStream::new(1, 0), 50, 2, &l).unwrap();
        assert_eq!(a, b);
        assert!(rademacher_adversary(&mut RngStream::new(1, 0), 0, 2, &l).is_err());
    }

    #[test]
    fn regret_single_round() {
        let domain = BoxDomain::cube(1, -0.5, 0.5).unwrap();
        let seq = AdversarySequence::new(vec![[1.0].into()], [1.0].into()).unwrap();
        assert_eq!(best_fixed_regret(&seq, &[[0.5].into()], &domain).unwrap(), 1.0);
        // learner sitting at the hindsight minimizer has zero regret
        assert_eq!(best_fixed_regret(&seq, &[[-0.5].into()], &domain).unwrap(), 0.0);
        assert!(best_fixed_regret(&seq, &[], &domain).is_err());
    }

    #[test]
    fn regret_enumeration_t4() {
        let domain = BoxDomain::cube(1, -0.5, 0.5).unwrap();
        let mut total = 0.0;
        for mask in 0u32..16 {
            let losses = (0..4)
                .map(|t| DenseVector::from(vec![if mask >> t & 1 == 1 { 1.0 } else { -1.0 }]))
                .collect();
            let seq = AdversarySequence::new(losses, [1.0].into()).unwrap();
            total += best_fixed_regret(&seq, &vec![DenseVector::zeros(1); 4], &domain).unwrap();
        }
        assert_eq!(total / 16.0, 0.75);
        let exact = exhaustive_expected_max_regret(4, &domain, &[1.0].into(), &[0.0].into()).unwrap();
        assert_eq!(exact, 0.75);
    }

    #[test]
    fn sampled_regret_agrees_with_enumeration() {
        let domain = BoxDomain::cube(2, -0.5, 0.5).unwrap();
        let bound: DenseVector = [1.0, 2.0].into();
        let x: DenseVector = [0.1, -0.2].into();
        let exact = exhaustive_expected_max_regret(3, &domain, &bound, &x).unwrap();
        let v = sampled_max_regret(&mut RngStream::new(4, 0), 3, &domain, &bound, &x, 20_000).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * sd / (v.len() as f64).sqrt());
        assert!(exhaustive_expected_max_regret(30, &domain, &bound, &x).is_err());
    }
}
