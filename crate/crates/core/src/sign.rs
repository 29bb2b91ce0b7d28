//! Deterministic and stochastic sign operators, the exact law of the
//! stochastic sign, and signal-to-noise diagnostics.
//!
//! `sign(0)` is `0` throughout. For `|x_i| <= G_i` the stochastic sign
//! `sgn(x_i + G_i n_i)` with `n_i ~ Unif[-1, 1]` equals `+1` with probability
//! `(G_i + x_i) / (2 G_i)`, so its mean is `x_i / G_i` and its variance is
//! `1 - (x_i / G_i)^2`.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::math::{DenseVector, NoiseSource};

/// Sequence over `{-1, 0, +1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn to_dense(&self) -> DenseVector {
        self.0.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }
}

impl Deref for SignVector {
    type Target = [i8];

    fn deref(&self) -> &[i8] {
        &self.0
    }
}

#[inline]
pub fn sign_scalar(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

pub fn det_sign(x: &DenseVector) -> SignVector {
    SignVector(x.iter().map(|&v| sign_scalar(v)).collect())
}

fn check_domination(x: &DenseVector, scale: &DenseVector) -> Result<()> {
    scale.check_len(x.len())?;
    for (coord, (&xi, &gi)) in x.iter().zip(scale.iter()).enumerate() {
        if !(gi >= 0.0) {
            return Err(Error::Precondition {
                coord,
                detail: format!("noise scale {gi} must be non-negative"),
            });
        }
        if !(xi.abs() <= gi) {
            return Err(Error::Precondition {
                coord,
                detail: format!("|x| = {} exceeds noise scale {gi}", xi.abs()),
            });
        }
    }
    Ok(())
}

/// `sgn(x + scale ⊙ n)` for an explicit noise vector.
///
/// No domination check: where `|x_i| > scale_i` the noise cannot flip the sign
/// and the coordinate saturates to `sign(x_i)`.
pub fn sign_with_noise(x: &DenseVector, scale: &DenseVector, n: &DenseVector) -> Result<SignVector> {
    scale.check_len(x.len())?;
    n.check_len(x.len())?;
    Ok(SignVector(
        x.iter()
            .zip(scale.iter())
            .zip(n.iter())
            .map(|((&xi, &gi), &ni)| sign_scalar(xi + gi * ni))
            .collect(),
    ))
}

/// Stochastic sign operator `S_G(x)`. Requires `0 <= |x_i| <= G_i`.
pub fn stochastic_sign<N: NoiseSource + ?Sized>(
    x: &DenseVector,
    scale: &DenseVector,
    noise: &mut N,
) -> Result<SignVector> {
    check_domination(x, scale)?;
    let n = noise.uniform_sym(x.len());
    sign_with_noise(x, scale, &n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignLaw {
    pub p_plus: f64,
    pub p_minus: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Exact per-coordinate law of `S_G(x)`.
pub fn sign_law(x: &DenseVector, scale: &DenseVector) -> Result<Vec<SignLaw>> {
    check_domination(x, scale)?;
    Ok(x.iter()
        .zip(scale.iter())
        .map(|(&xi, &gi)| {
            if gi == 0.0 {
                // x_i is forced to 0; the output is 0 with probability one.
                return SignLaw {
                    p_plus: 0.0,
                    p_minus: 0.0,
                    mean: 0.0,
                    variance: 0.0,
                };
            }
            let r = xi / gi;
            SignLaw {
                p_plus: (gi + xi) / (2.0 * gi),
                p_minus: (gi - xi) / (2.0 * gi),
                mean: r,
                variance: 1.0 - r * r,
            }
        })
        .collect())
}

pub const SNR_QUANTILE_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Debug, PartialEq)]
pub struct SnrMetrics {
    /// `clamp(m / sigma, -1, 1)` per coordinate.
    pub ratio: DenseVector,
    pub rms_of_ratio: f64,
    /// `d (1 - rms^2)`: summed variance of the converted sign update.
    pub total_variance: f64,
    /// Quantiles of `|ratio|` at [`SNR_QUANTILE_LEVELS`].
    pub quantiles: [f64; 9],
}

/// Clamped ratio `m_i / sigma_i`, with `0 / 0 = 0` and saturation to `±1`.
pub fn clamped_ratio(m: f64, sigma: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else if m.abs() >= sigma {
        f64::from(sign_scalar(m))
    } else {
        m / sigma
    }
}

pub fn snr_metrics(m: &DenseVector, sigma: &DenseVector) -> Result<SnrMetrics> {
    sigma.check_len(m.len())?;
    if let Some(coord) = sigma.iter().position(|&s| !(s >= 0.0)) {
        return Err(Error::Precondition {
            coord,
            detail: format!("sigma {} must be non-negative", sigma[coord]),
        });
    }
    let ratio = m.zip_map(sigma, clamped_ratio)?;
    let d = ratio.len() as f64;
    let rms_of_ratio = ratio.norms().rms;
    let mut mags: Vec<f64> = ratio.iter().map(|r| r.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let mut quantiles = [0.0; 9];
    for (q, &level) in quantiles.iter_mut().zip(SNR_QUANTILE_LEVELS.iter()) {
        *q = quantile_sorted(&mags, level);
    }
    Ok(SnrMetrics {
        total_variance: d * (1.0 - rms_of_ratio * rms_of_ratio),
        rms_of_ratio,
        ratio,
        quantiles,
    })
}

/// Linear-interpolation quantile of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = level.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{FixedNoise, RngStream};
    use proptest::prelude::*;

    #[test]
    fn det_sign_examples() {
        let s = det_sign(&[-3.0, 0.0, 2.0].into());
        assert_eq!(s.as_slice(), &[-1, 0, 1]);
        assert_eq!(det_sign(&[1.0, 5.0, 0.1].into()).as_slice(), &[1, 1, 1]);
        let x: DenseVector = [-3.0, 0.0, 2.0, -0.5].into();
        assert_eq!(det_sign(&det_sign(&x).to_dense()), det_sign(&x));
    }

    #[test]
    fn law_at_half() {
        let law = sign_law(&[0.5].into(), &[1.0].into()).unwrap()[0];
        assert_eq!(law.p_plus, 0.75);
        assert_eq!(law.p_minus, 0.25);
        assert_eq!(law.mean, 0.5);
        assert_eq!(law.variance, 0.75);
    }

    #[test]
    fn law_boundaries() {
        let law = sign_law(&[2.0, 0.0, 0.0].into(), &[2.0, 3.0, 0.0].into()).unwrap();
        assert_eq!((law[0].mean, law[0].variance), (1.0, 0.0));
        assert_eq!(law[1].variance, 1.0);
        assert_eq!((law[2].mean, law[2].variance), (0.0, 0.0));
    }

    #[test]
    fn empirical_law_at_half() {
        let mut rng = RngStream::new(1, 0);
        let n = 100_000;
        let x: DenseVector = [0.5].into();
        let g: DenseVector = [1.0].into();
        let plus = (0..n)
            .filter(|_| stochastic_sign(&x, &g, &mut rng).unwrap()[0] == 1)
            .count();
        assert!((plus as f64 / n as f64 - 0.75).abs() < 0.013);
    }

    #[test]
    fn zero_input_is_fair() {
        let mut rng = RngStream::new(2, 0);
        let n = 100_000;
        let sum: i64 = (0..n)
            .map(|_| i64::from(stochastic_sign(&[0.0].into(), &[1.0].into(), &mut rng).unwrap()[0]))
            .sum();
        assert!((sum as f64 / n as f64).abs() < 0.013);
    }

    #[test]
    fn boundary_and_degenerate() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..10_000 {
            assert_eq!(stochastic_sign(&[1.0].into(), &[1.0].into(), &mut rng).unwrap()[0], 1);
            assert_eq!(stochastic_sign(&[0.0].into(), &[0.0].into(), &mut rng).unwrap()[0], 0);
        }
        // x + G n = 0 exactly maps to 0
        let s = sign_with_noise(&[1.0].into(), &[1.0].into(), &[-1.0].into()).unwrap();
        assert_eq!(s[0], 0);
    }

    #[test]
    fn precondition_names_coordinate() {
        let err = stochastic_sign(&[0.1, 2.0].into(), &[1.0, 1.0].into(), &mut FixedNoise::zero())
            .unwrap_err();
        assert!(matches!(err, Error::Precondition { coord: 1, .. }));
        let err = sign_law(&[0.0].into(), &[-1.0].into()).unwrap_err();
        assert!(matches!(err, Error::Precondition { coord: 0, .. }));
    }

    #[test]
    fn snr_examples() {
        let m = snr_metrics(&[1.0, 0.0].into(), &[1.0, 1.0].into()).unwrap();
        // brute force: (1 - 1^2) + (1 - 0^2)
        let brute: f64 = [1.0_f64, 0.0].iter().map(|r| 1.0 - r * r).sum();
        assert!((m.total_variance - brute).abs() < 1e-15);

        let s: DenseVector = [0.3, 2.0, 1.5].into();
        assert!(snr_metrics(&s, &s).unwrap().total_variance.abs() < 1e-15);
        let m = snr_metrics(&DenseVector::zeros(4), &[1.0, 2.0, 0.0, 3.0].into()).unwrap();
        assert_eq!(m.total_variance, 4.0);
        assert!(m.quantiles.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn snr_saturates() {
        let m = snr_metrics(&[3.0, -2.0, 1.0].into(), &[1.0, 1.0, 0.0].into()).unwrap();
        assert_eq!(m.ratio.as_slice(), &[1.0, -1.0, 1.0]);
        assert_eq!(m.total_variance, 0.0);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert!((quantile_sorted(&v, 0.1) - 0.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn outputs_are_signs(xs in prop::collection::vec(-5.0..5.0f64, 1..6), seed in any::<u64>()) {
            let x = DenseVector::from_vec(xs);
            let g = x.abs().map(|v| v + 0.5);
            let s = stochastic_sign(&x, &g, &mut RngStream::new(seed, 0)).unwrap();
            prop_assert!(s.iter().all(|v| (-1..=1).contains(v)));
            prop_assert!(det_sign(&x).iter().all(|v| v.abs() <= 1));
        }
    }
}
