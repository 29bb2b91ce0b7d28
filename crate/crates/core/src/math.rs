//! Dense vectors, seeded random streams and the distributions the optimizers draw from.
//!
//! Every sampling step in the crate goes through the [`NoiseSource`] trait. The
//! production implementation is [`RngStream`]; [`FixedNoise`], [`Recorder`] and
//! [`Replay`] are hooks that pin or replay the draws so trajectories can be
//! compared against hand-stepped references.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Deref, Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fixed-length vector of `f64`.
#[derive(Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    /// Wraps `values` without checking them.
    pub fn from_vec(values: Vec<f64>) -> Self {
        DenseVector(values)
    }

    /// Wraps `values`, rejecting NaN and infinities.
    pub fn try_from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(DenseVector(values))
    }

    pub fn zeros(d: usize) -> Self {
        DenseVector(vec![0.0; d])
    }

    pub fn filled(d: usize, value: f64) -> Self {
        DenseVector(vec![value; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.len(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseVector {
        DenseVector(self.0.iter().map(|&v| f(v)).collect())
    }

    /// Coordinate-wise combination of two equal-length vectors.
    pub fn zip_map(&self, other: &DenseVector, f: impl Fn(f64, f64) -> f64) -> Result<DenseVector> {
        other.check_len(self.len())?;
        Ok(DenseVector(
            self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn abs(&self) -> DenseVector {
        self.map(f64::abs)
    }

    pub fn scaled(&self, factor: f64) -> DenseVector {
        self.map(|v| v * factor)
    }

    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn norms(&self) -> Norms {
        norms(self)
    }

    /// Arithmetic mean of equal-length vectors.
    pub fn mean_of(vectors: &[DenseVector]) -> Result<DenseVector> {
        let first = vectors.first().ok_or(Error::EmptyWindow)?;
        let mut acc = vec![0.0; first.len()];
        for v in vectors {
            v.check_len(acc.len())?;
            for (a, x) in acc.iter_mut().zip(&v.0) {
                *a += x;
            }
        }
        let n = vectors.len() as f64;
        Ok(DenseVector(acc.into_iter().map(|a| a / n).collect()))
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(values: Vec<f64>) -> Self {
        DenseVector(values)
    }
}

impl<const N: usize> From<[f64; N]> for DenseVector {
    fn from(values: [f64; N]) -> Self {
        DenseVector(values.to_vec())
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        DenseVector(iter.into_iter().collect())
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

/// `c_i = max(a_i, b_i)`.
pub fn elementwise_max(a: &DenseVector, b: &DenseVector) -> Result<DenseVector> {
    a.zip_map(b, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub linf: f64,
    pub rms: f64,
}

pub fn norms(v: &DenseVector) -> Norms {
    let l1 = v.iter().map(|x| x.abs()).sum();
    let linf = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let rms = if v.is_empty() {
        0.0
    } else {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    };
    Norms { l1, linf, rms }
}

/// Source of every random draw an algorithm makes.
pub trait NoiseSource {
    /// `d` independent draws from Unif[-1, 1].
    fn uniform_sym(&mut self, d: usize) -> DenseVector;
    /// One draw from Exp(1).
    fn exp1(&mut self) -> f64;
    /// One draw from Unif[0, 1].
    fn unit(&mut self) -> f64;
    /// Uniform index in `0..n`.
    fn index(&mut self, n: usize) -> usize;
}

impl<N: NoiseSource + ?Sized> NoiseSource for &mut N {
    fn uniform_sym(&mut self, d: usize) -> DenseVector {
        (**self).uniform_sym(d)
    }
    fn exp1(&mut self) -> f64 {
        (**self).exp1()
    }
    fn unit(&mut self) -> f64 {
        (**self).unit()
    }
    fn index(&mut self, n: usize) -> usize {
        (**self).index(n)
    }
}

/// Reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives each optimizer
/// instance or experiment seed its own independent sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different stream id.
    pub fn derive(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }

    /// Unif[0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    /// Unif(0, 1]; never returns zero.
    pub fn next_open_closed(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    pub fn rademacher(&mut self, d: usize) -> DenseVector {
        (0..d)
            .map(|_| if self.rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }
}

impl NoiseSource for RngStream {
    fn uniform_sym(&mut self, d: usize) -> DenseVector {
        (0..d).map(|_| 2.0 * self.next_f64() - 1.0).collect()
    }

    fn exp1(&mut self) -> f64 {
        exp1_from_uniform(self.next_open_closed())
    }

    fn unit(&mut self) -> f64 {
        self.next_f64()
    }

    fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n.max(1))
    }
}

/// Inverse CDF of Exp(1) at `u`. A zero `u` is mapped to the smallest positive
/// double so the result stays finite.
pub fn exp1_from_uniform(u: f64) -> f64 {
    let u = if u <= 0.0 { f64::MIN_POSITIVE } else { u };
    -u.ln()
}

pub fn sample_uniform_sym(rng: &mut RngStream, d: usize) -> Result<DenseVector> {
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    Ok(rng.uniform_sym(d))
}

pub fn sample_exp1(rng: &mut RngStream) -> f64 {
    rng.exp1()
}

pub fn sample_rademacher(rng: &mut RngStream, d: usize) -> Result<DenseVector> {
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    Ok(rng.rademacher(d))
}

/// Noise hook returning constants: every sign-noise coordinate is `sign`,
/// every Exp(1) or Unif[0,1] scale is the configured value.
#[derive(Clone, Copy, Debug)]
pub struct FixedNoise {
    pub sign: f64,
    pub exp_scale: f64,
    pub unit_scale: f64,
    pub index: usize,
}

impl FixedNoise {
    /// `n_t = 0`, `s_t = 1` for both scalings, index 0.
    pub fn zero() -> Self {
        FixedNoise {
            sign: 0.0,
            exp_scale: 1.0,
            unit_scale: 1.0,
            index: 0,
        }
    }

    pub fn with_scale(mut self, s: f64) -> Self {
        self.exp_scale = s;
        self.unit_scale = s;
        self
    }

    pub fn with_sign(mut self, n: f64) -> Self {
        self.sign = n;
        self
    }
}

impl NoiseSource for FixedNoise {
    fn uniform_sym(&mut self, d: usize) -> DenseVector {
        DenseVector::filled(d, self.sign)
    }
    fn exp1(&mut self) -> f64 {
        self.exp_scale
    }
    fn unit(&mut self) -> f64 {
        self.unit_scale
    }
    fn index(&mut self, n: usize) -> usize {
        self.index.min(n.saturating_sub(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Draw {
    Sign(DenseVector),
    Exp(f64),
    Unit(f64),
    Index(usize),
}

/// Wraps a source and logs every draw it hands out.
#[derive(Clone, Debug)]
pub struct Recorder<S> {
    inner: S,
    log: Vec<Draw>,
}

impl<S: NoiseSource> Recorder<S> {
    pub fn new(inner: S) -> Self {
        Recorder {
            inner,
            log: Vec::new(),
        }
    }

    pub fn draws(&self) -> &[Draw] {
        &self.log
    }

    pub fn into_draws(self) -> Vec<Draw> {
        self.log
    }
}

impl<S: NoiseSource> NoiseSource for Recorder<S> {
    fn uniform_sym(&mut self, d: usize) -> DenseVector {
        let n = self.inner.uniform_sym(d);
        self.log.push(Draw::Sign(n.clone()));
        n
    }
    fn exp1(&mut self) -> f64 {
        let s = self.inner.exp1();
        self.log.push(Draw::Exp(s));
        s
    }
    fn unit(&mut self) -> f64 {
        let s = self.inner.unit();
        self.log.push(Draw::Unit(s));
        s
    }
    fn index(&mut self, n: usize) -> usize {
        let i = self.inner.index(n);
        self.log.push(Draw::Index(i));
        i
    }
}

/// Replays a recorded draw log. Panics if the consumer asks for a different
/// kind of draw than the one recorded next; that means the two runs diverged.
#[derive(Clone, Debug)]
pub struct Replay {
    draws: VecDeque<Draw>,
}

impl Replay {
    pub fn new(draws: impl IntoIterator<Item = Draw>) -> Self {
        Replay {
            draws: draws.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.draws.len()
    }

    fn next(&mut self, what: &str) -> Draw {
        self.draws
            .pop_front()
            .unwrap_or_else(|| panic!("replay exhausted while drawing {what}"))
    }
}

impl NoiseSource for Replay {
    fn uniform_sym(&mut self, d: usize) -> DenseVector {
        match self.next("sign noise") {
            Draw::Sign(n) if n.len() == d => n,
            other => panic!("replay out of sync: wanted sign noise of length {d}, got {other:?}"),
        }
    }
    fn exp1(&mut self) -> f64 {
        match self.next("exp scale") {
            Draw::Exp(s) => s,
            other => panic!("replay out of sync: wanted exp scale, got {other:?}"),
        }
    }
    fn unit(&mut self) -> f64 {
        match self.next("unit scale") {
            Draw::Unit(s) => s,
            other => panic!("replay out of sync: wanted unit scale, got {other:?}"),
        }
    }
    fn index(&mut self, n: usize) -> usize {
        match self.next("index") {
            Draw::Index(i) if i < n.max(1) => i,
            other => panic!("replay out of sync: wanted index below {n}, got {other:?}"),
        }
    }
}
