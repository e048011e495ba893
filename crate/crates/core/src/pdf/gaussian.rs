use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::LogDensity;
use crate::error::{Error, Result};
use crate::math;

/// Largest accepted covariance condition number.
pub const MAX_CONDITION: f64 = 1e12;

const SYMMETRY_TOL: f64 = 1e-9;

/// A multivariate normal density with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl PartialEq for Gaussian {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl Gaussian {
    /// Builds a Gaussian, rejecting asymmetric, indefinite or
    /// ill-conditioned covariances.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("gaussian dimension must be at least 1".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("gaussian parameters must be finite".into()));
        }
        let scale = cov.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL * scale.max(1e-300) {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let cov = symmetrize(cov);
        let condition = condition_number(&cov)?;
        if condition > MAX_CONDITION {
            return Err(Error::IllConditioned { condition });
        }
        let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
        let log_det = 2.0 * chol.diagonal().iter().map(|v| math::ln(*v)).sum::<f64>();
        Ok(Self { mean, cov, chol, log_det })
    }

    /// Convenience constructor from a mean slice and a row-major covariance.
    pub fn from_slices(mean: &[f64], cov_row_major: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov_row_major.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: cov_row_major.len() });
        }
        Self::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(d, d, cov_row_major))
    }

    /// One-dimensional normal `N(mean, variance)`.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::from_slices(&[mean], &[variance])
    }

    /// `N(mean, variance * I)`.
    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(DVector::from_column_slice(mean), DMatrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular Cholesky factor `L` with `L Lᵀ = cov`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn determinant(&self) -> f64 {
        math::exp(self.log_det)
    }

    /// Inverse covariance.
    pub fn precision(&self) -> DMatrix<f64> {
        cholesky_inverse(&self.chol)
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let maha = mahalanobis_sq(&self.chol, x, self.mean.as_slice());
        -0.5 * (self.dim() as f64 * math::LN_2PI + self.log_det + maha)
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        math::exp(self.log_pdf(x))
    }

    /// Draws `mean + L z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.dim();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.mean + &self.chol * z
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.dim() });
        }
        Ok(())
    }
}

impl LogDensity for Gaussian {
    fn dim(&self) -> usize {
        Gaussian::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_pdf(x)
    }
}

/// Product of two Gaussian densities.
///
/// `N(x; a) N(x; b) = z N(x; μ, Σ)` with `Σ = (Σa⁻¹ + Σb⁻¹)⁻¹`,
/// `μ = Σ (Σa⁻¹ μa + Σb⁻¹ μb)` and `z = N(μa; μb, Σa + Σb)`.
/// Returns the normalized Gaussian and `ln z`.
pub fn gaussian_product(a: &Gaussian, b: &Gaussian) -> Result<(Gaussian, f64)> {
    b.check_dim(a.dim())?;
    let pa = a.precision();
    let pb = b.precision();
    let info = symmetrize(&pa + &pb);
    let info_chol = info.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let cov = symmetrize(cholesky_inverse(&info_chol));
    let mean = &cov * (&pa * a.mean() + &pb * b.mean());

    let sum = symmetrize(a.cov() + b.cov());
    let sum_chol = sum.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let sum_log_det = 2.0 * sum_chol.diagonal().iter().map(|v| math::ln(*v)).sum::<f64>();
    let maha = mahalanobis_sq(&sum_chol, a.mean().as_slice(), b.mean().as_slice());
    let log_scale = -0.5 * (a.dim() as f64 * math::LN_2PI + sum_log_det + maha);

    Ok((Gaussian::new(mean, cov)?, log_scale))
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let d = l.nrows();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .expect("cholesky factor has a nonzero diagonal");
    symmetrize(l_inv.transpose() * l_inv)
}

fn mahalanobis_sq(l: &DMatrix<f64>, x: &[f64], mean: &[f64]) -> f64 {
    // forward substitution on L y = x - mean
    let d = mean.len();
    let mut y: Vec<f64> = Vec::with_capacity(d);
    let mut acc = 0.0;
    for i in 0..d {
        let mut v = x[i] - mean[i];
        for (k, yk) in y.iter().enumerate() {
            v -= l[(i, k)] * yk;
        }
        let yi = v / l[(i, i)];
        acc += yi * yi;
        y.push(yi);
    }
    acc
}

fn condition_number(cov: &DMatrix<f64>) -> Result<f64> {
    if cov.nrows() == 1 {
        return if cov[(0, 0)] > 0.0 { Ok(1.0) } else { Err(Error::NotPositiveDefinite) };
    }
    let eig = cov.clone().symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(max / min)
}
