use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;

/// Maximum number of continuous dimensions a grid may have.
pub const MAX_GRID_DIMS: usize = 3;

/// Rectangular cell-centred discretization of a 1-, 2- or 3-D box.
///
/// Cells are stored row-major: the last dimension varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bounds: Vec<(f64, f64)>,
    shape: Vec<usize>,
}

impl Grid {
    pub fn new(bounds: Vec<(f64, f64)>, shape: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > MAX_GRID_DIMS {
            return Err(Error::InvalidGrid(alloc::format!(
                "grids support 1 to {MAX_GRID_DIMS} dimensions, got {}",
                bounds.len()
            )));
        }
        if bounds.len() != shape.len() {
            return Err(Error::DimensionMismatch { expected: bounds.len(), found: shape.len() });
        }
        for (d, ((lo, hi), n)) in bounds.iter().zip(&shape).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidGrid(alloc::format!("dimension {d}: bounds [{lo}, {hi}] invalid")));
            }
            if *n == 0 {
                return Err(Error::InvalidGrid(alloc::format!("dimension {d}: zero cells")));
            }
        }
        Ok(Self { bounds, shape })
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self, dim: usize) -> f64 {
        let (lo, hi) = self.bounds[dim];
        (hi - lo) / self.shape[dim] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim()).map(|d| self.cell_width(d)).product()
    }

    /// Writes the centre of flat cell `index` into `out` (length `ndim`).
    pub fn center_into(&self, index: usize, out: &mut [f64]) {
        let mut rem = index;
        for d in (0..self.ndim()).rev() {
            let n = self.shape[d];
            let i = rem % n;
            rem /= n;
            out[d] = self.bounds[d].0 + (i as f64 + 0.5) * self.cell_width(d);
        }
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.ndim()];
        self.center_into(index, &mut out);
        out
    }

    /// Calls `f(index, centre)` for every cell in storage order.
    pub fn for_each_center(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut buf = [0.0; MAX_GRID_DIMS];
        let x = &mut buf[..self.ndim()];
        for i in 0..self.len() {
            self.center_into(i, x);
            f(i, x);
        }
    }

    /// Flat index of the cell containing `x`, if inside the box.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.ndim() {
            return None;
        }
        let mut index = 0;
        for d in 0..self.ndim() {
            let (lo, hi) = self.bounds[d];
            if !(x[d] >= lo && x[d] <= hi) {
                return None;
            }
            let i = (((x[d] - lo) / self.cell_width(d)) as usize).min(self.shape[d] - 1);
            index = index * self.shape[d] + i;
        }
        Some(index)
    }
}

/// A normalized discrete approximation of a density on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridPdf {
    grid: Grid,
    mass: Vec<f64>,
}

impl GridPdf {
    /// Midpoint-rule rasterization: `mass = f(centre) * volume`, normalized.
    pub fn from_density(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let vol = grid.cell_volume();
        let mut mass = Vec::with_capacity(grid.len());
        grid.for_each_center(|_, x| mass.push(f(x) * vol));
        Self::from_masses(grid, mass)
    }

    /// Rasterizes a log-density; robust to densities far below `f64::MIN_POSITIVE`.
    pub fn from_log_density(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut log_mass = Vec::with_capacity(grid.len());
        grid.for_each_center(|_, x| log_mass.push(f(x)));
        Self::from_log_masses(grid, &log_mass)
    }

    /// Normalizes nonnegative masses.
    pub fn from_masses(grid: Grid, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.len() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} masses for a grid of {} cells",
                mass.len(),
                grid.len()
            )));
        }
        if let Some(i) = mass.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidProbabilities(alloc::format!("cell {i} has mass {}", mass[i])));
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateDensity);
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self { grid, mass })
    }

    /// Accepts masses that already sum to one within `1e-9` and stores them
    /// unchanged, so serialized beliefs load bit for bit.
    pub fn from_normalized(grid: Grid, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.len() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} masses for a grid of {} cells",
                mass.len(),
                grid.len()
            )));
        }
        if let Some(i) = mass.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidProbabilities(alloc::format!("cell {i} has mass {}", mass[i])));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbabilities(alloc::format!("masses sum to {total}")));
        }
        Ok(Self { grid, mass })
    }

    pub fn from_log_masses(grid: Grid, log_mass: &[f64]) -> Result<Self> {
        if log_mass.len() != grid.len() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} masses for a grid of {} cells",
                log_mass.len(),
                grid.len()
            )));
        }
        if log_mass.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::InvalidProbabilities("log-mass is NaN or +inf".into()));
        }
        let mass = math::normalize_log_masses(log_mass).ok_or(Error::DegenerateDensity)?;
        Ok(Self { grid, mass })
    }

    /// Uniform mass over the grid.
    pub fn uniform(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, mass: alloc::vec![1.0 / n as f64; n] }
    }

    /// Wraps masses that the caller guarantees are nonnegative and sum to one.
    pub(crate) fn from_normalized_unchecked(grid: Grid, mass: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), mass.len());
        Self { grid, mass }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Density value (mass / cell volume) of cell `index`.
    pub fn density(&self, index: usize) -> f64 {
        self.mass[index] / self.grid.cell_volume()
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.grid.ndim();
        let mut mean = alloc::vec![0.0; d];
        self.grid.for_each_center(|i, x| {
            for k in 0..d {
                mean[k] += self.mass[i] * x[k];
            }
        });
        mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.grid.ndim();
        let mean = self.mean();
        let mut cov = DMatrix::zeros(d, d);
        self.grid.for_each_center(|i, x| {
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += self.mass[i] * (x[a] - mean[a]) * (x[b] - mean[b]);
                }
            }
        });
        cov
    }

    /// Shannon entropy of the cell masses, in nats.
    pub fn entropy(&self) -> f64 {
        super::entropy(&self.mass)
    }

    pub fn check_same_grid(&self, other: &GridPdf) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("pdfs are defined on different grids".into()));
        }
        Ok(())
    }

    /// Largest cellwise absolute mass difference; grids must match.
    pub fn max_abs_diff(&self, other: &GridPdf) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// `KL(p || q)` in nats between two pdfs on the same grid.
pub fn grid_kld(p: &GridPdf, q: &GridPdf) -> Result<f64> {
    p.check_same_grid(q)?;
    super::kld_masses(p.mass(), q.mass())
}
