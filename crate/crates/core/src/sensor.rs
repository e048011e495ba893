//! Binary visual detector.

use crate::error::{Error, Result};
use crate::math;

/// Outcome of one sensing action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detection {
    Detected,
    NotDetected,
}

/// `P(detect | x, pose) = p_max exp(-|x - pose|² / (2 σ²))` inside `range`,
/// zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub range: f64,
    pub p_max: f64,
    pub falloff: f64,
}

impl SensorModel {
    pub fn new(range: f64, p_max: f64, falloff: f64) -> Result<Self> {
        let s = Self { range, p_max, falloff };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("sensor range {} must be positive", self.range)));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("p_max {} outside (0, 1]", self.p_max)));
        }
        if !(self.falloff > 0.0 && self.falloff.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("falloff {} must be positive", self.falloff)));
        }
        Ok(())
    }

    /// Detection probability at squared distance `dist_sq` from the sensor.
    pub fn detection_probability(&self, dist_sq: f64) -> f64 {
        if dist_sq > self.range * self.range {
            0.0
        } else {
            self.p_max * math::exp(-dist_sq / (2.0 * self.falloff * self.falloff))
        }
    }

    pub fn likelihood(&self, outcome: Detection, dist_sq: f64) -> f64 {
        let pd = self.detection_probability(dist_sq);
        match outcome {
            Detection::Detected => pd,
            Detection::NotDetected => 1.0 - pd,
        }
    }
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
