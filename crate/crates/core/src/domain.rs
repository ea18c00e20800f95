//! Axis-aligned boxes used as sampling domains and operating regions.

use crate::error::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[lo_i, hi_i]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Contract(format!(
                "box bounds have mismatched lengths {} vs {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::DegenerateDomain(
                "box has inverted or non-finite bounds".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Strictly positive width on every axis.
    pub fn has_volume(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| h > l)
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| 0.5 * (self.lo[i] + self.hi[i]))
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lo[i] && v <= self.hi[i])
    }

    /// Distance from `x` to the nearest face of the box (0 outside).
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.lo[i]).min(self.hi[i] - v))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            if self.hi[i] > self.lo[i] {
                rng.random_range(self.lo[i]..self.hi[i])
            } else {
                self.lo[i]
            }
        })
    }
}

/// Uniform sample from the closed Euclidean ball of `radius` around `center`.
///
/// Direction from a normalized Gaussian, radius from the `U^(1/n)` law.
pub fn sample_ball<R: Rng>(center: &DVector<f64>, radius: f64, rng: &mut R) -> DVector<f64> {
    let n = center.len();
    if radius == 0.0 || n == 0 {
        return center.clone();
    }
    let normal = rand_distr::StandardNormal;
    let mut dir = DVector::from_fn(n, |_, _| rand_distr::Distribution::sample(&normal, rng));
    let norm = dir.norm();
    if norm == 0.0 {
        return center.clone();
    }
    dir /= norm;
    let u: f64 = rng.random_range(0.0..=1.0);
    let r = radius * u.powf(1.0 / n as f64);
    center + dir * r
}
