//! Axis-aligned boxes and the diagonally weighted projection onto them.

use crate::error::{Error, Result};
use crate::math::DenseVector;

#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lo: DenseVector,
    hi: DenseVector,
}

impl BoxDomain {
    pub fn new(lo: DenseVector, hi: DenseVector) -> Result<Self> {
        hi.check_len(lo.len())?;
        if lo.is_empty() {
            return Err(Error::EmptyDimension);
        }
        for (coord, (&l, &h)) in lo.iter().zip(hi.iter()).enumerate() {
            if !(l <= h) {
                return Err(Error::Precondition {
                    coord,
                    detail: format!("lower bound {l} exceeds upper bound {h}"),
                });
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    /// `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::new(DenseVector::filled(d, lo), DenseVector::filled(d, hi))
    }

    /// The ∞-norm ball `B_∞(center, radius)`.
    pub fn linf_ball(center: &DenseVector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::invalid("radius", format!("{radius} must be non-negative")));
        }
        BoxDomain::new(center.map(|c| c - radius), center.map(|c| c + radius))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DenseVector {
        &self.lo
    }

    pub fn hi(&self) -> &DenseVector {
        &self.hi
    }

    pub fn contains(&self, x: &DenseVector) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(&v, (&l, &h))| l <= v && v <= h)
    }

    pub fn center(&self) -> DenseVector {
        self.lo.zip_map(&self.hi, |l, h| 0.5 * (l + h)).expect("box bounds share a length")
    }

    pub fn diameter_inf(&self) -> f64 {
        inf_diameter(self)
    }
}

/// `max_i (hi_i - lo_i)`.
pub fn inf_diameter(domain: &BoxDomain) -> f64 {
    domain
        .lo
        .iter()
        .zip(domain.hi.iter())
        .fold(0.0_f64, |m, (l, h)| m.max(h - l))
}

/// `argmin_{y in box} Σ w_i (y_i - p_i)^2`.
///
/// A diagonal quadratic over a box separates by coordinate, so the minimizer is
/// the clamp of `p` for any positive weights. Zero-weight coordinates, where
/// every feasible value is optimal, are clamped as well.
pub fn project_weighted(p: &DenseVector, weights: &DenseVector, domain: &BoxDomain) -> Result<DenseVector> {
    p.check_len(domain.dim())?;
    weights.check_len(domain.dim())?;
    if let Some(coord) = weights.iter().position(|&w| !(w >= 0.0)) {
        return Err(Error::Precondition {
            coord,
            detail: format!("projection weight {} must be non-negative", weights[coord]),
        });
    }
    Ok(p.iter()
        .zip(domain.lo.iter().zip(domain.hi.iter()))
        .map(|(&v, (&l, &h))| v.clamp(l, h))
        .collect())
}

/// `Σ w_i (y_i - p_i)^2`.
pub fn weighted_sq_dist(y: &DenseVector, p: &DenseVector, weights: &DenseVector) -> f64 {
    y.iter()
        .zip(p.iter())
        .zip(weights.iter())
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum()
}
