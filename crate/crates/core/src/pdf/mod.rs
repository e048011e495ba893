//! Density representations: Gaussians, Gaussian mixtures, grid pdfs and
//! discrete distributions, plus the primitive operations on them.

mod discrete;
mod gaussian;
mod grid;
mod mixture;

pub use discrete::DiscreteDist;
pub use gaussian::{gaussian_product, Gaussian, MAX_CONDITION};
pub use grid::{grid_kld, Grid, GridPdf, MAX_GRID_DIMS};
pub use mixture::{Component, GaussianMixture};

pub(crate) use gaussian::symmetrize;

use crate::error::{Error, Result};
use crate::math;

/// A pointwise-evaluable (possibly unnormalized) log-density.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
}

/// Adapts a closure into a [`LogDensity`].
#[derive(Clone, Copy)]
pub struct FnLogDensity<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnLogDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> LogDensity for FnLogDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// `KL(p || q) = sum p log(p / q)` over aligned mass vectors. Entries with
/// `p = 0` contribute nothing; `p > 0, q = 0` is an error naming the entry.
pub fn kld_masses(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::GridMismatch(alloc::format!("{} vs {} cells", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if !(qi > 0.0) {
                return Err(Error::AbsoluteContinuity { cell: i });
            }
            total += pi * (math::ln(pi) - math::ln(qi));
        }
    }
    if total < 0.0 && total > -1e-12 {
        total = 0.0;
    }
    Ok(total)
}

/// Shannon entropy of a mass vector in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * math::ln(*v)).sum::<f64>()
}
