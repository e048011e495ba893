use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{Gaussian, LogDensity};
use crate::error::{Error, Result};
use crate::math;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// One weighted mixand.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub gaussian: Gaussian,
}

/// A finite Gaussian mixture with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Component>,
    dim: usize,
}

impl GaussianMixture {
    /// Builds a mixture from already-normalized weights.
    pub fn new(components: Vec<(f64, Gaussian)>) -> Result<Self> {
        let dim = Self::check_components(&components)?;
        for (w, _) in &components {
            if !(0.0..=1.0).contains(w) || !w.is_finite() {
                return Err(Error::InvalidWeights(alloc::format!("weight {w} outside [0, 1]")));
            }
        }
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(alloc::format!("weights sum to {total}, expected 1")));
        }
        Ok(Self {
            components: components.into_iter().map(|(weight, gaussian)| Component { weight, gaussian }).collect(),
            dim,
        })
    }

    /// Builds a mixture from nonnegative weights of any positive total.
    pub fn from_unnormalized(components: Vec<(f64, Gaussian)>) -> Result<Self> {
        let dim = Self::check_components(&components)?;
        if components.iter().any(|(w, _)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        Ok(Self {
            components: components
                .into_iter()
                .map(|(w, gaussian)| Component { weight: w / total, gaussian })
                .collect(),
            dim,
        })
    }

    /// Builds a mixture from log-weights, normalizing with log-sum-exp.
    pub fn from_log_weights(components: Vec<(f64, Gaussian)>) -> Result<Self> {
        let dim = Self::check_components(&components)?;
        let logs: Vec<f64> = components.iter().map(|(l, _)| *l).collect();
        if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::InvalidWeights("log-weights must not be NaN or +inf".into()));
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        let total: f64 = logs.iter().map(|l| math::exp(l - max)).sum();
        Ok(Self {
            components: components
                .into_iter()
                .map(|(l, gaussian)| Component { weight: math::exp(l - max) / total, gaussian })
                .collect(),
            dim,
        })
    }

    fn check_components(components: &[(f64, Gaussian)]) -> Result<usize> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidWeights("mixture needs at least one component".into()))?;
        let dim = first.1.dim();
        for (_, g) in components {
            g.check_dim(dim)?;
        }
        Ok(dim)
    }

    pub fn single(gaussian: Gaussian) -> Self {
        let dim = gaussian.dim();
        Self { components: alloc::vec![Component { weight: 1.0, gaussian }], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.components.iter().map(|c| c.weight)
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let max_terms = self.components.len();
        let mut terms: Vec<f64> = Vec::with_capacity(max_terms);
        for c in &self.components {
            if c.weight > 0.0 {
                terms.push(math::ln(c.weight) + c.gaussian.log_pdf(x));
            }
        }
        math::log_sum_exp(&terms)
    }

    /// Density at `x`, checking the dimension.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(math::exp(self.evaluate_log(x)?))
    }

    /// Log-density at `x`, checking the dimension.
    pub fn evaluate_log(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.log_pdf(x))
    }

    /// Single Gaussian with the mixture's mean and covariance.
    pub fn moment_match(&self) -> Result<Gaussian> {
        let d = self.dim;
        let mut mean = DVector::zeros(d);
        for c in &self.components {
            mean += c.gaussian.mean() * c.weight;
        }
        let mut cov = DMatrix::zeros(d, d);
        for c in &self.components {
            let diff = c.gaussian.mean() - &mean;
            cov += (c.gaussian.cov() + &diff * diff.transpose()) * c.weight;
        }
        Gaussian::new(mean, cov)
    }
}

impl LogDensity for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_pdf(x)
    }
}
