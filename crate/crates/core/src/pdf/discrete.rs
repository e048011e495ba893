use alloc::vec::Vec;

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// Probability vector over a finite set of categories (e.g. search regions).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    /// Accepts probabilities that already sum to one within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate(&probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidProbabilities(alloc::format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        validate(&weights)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateDensity);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { probs: weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProbabilities("empty distribution".into()));
        }
        Ok(Self { probs: alloc::vec![1.0 / n as f64; n] })
    }

    pub(crate) fn from_normalized_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        super::entropy(&self.probs)
    }

    pub fn kld(&self, other: &DiscreteDist) -> Result<f64> {
        super::kld_masses(&self.probs, &other.probs)
    }
}

fn validate(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty distribution".into()));
    }
    if let Some(i) = p.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidProbabilities(alloc::format!("entry {i} is {}", p[i])));
    }
    Ok(())
}
