use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, ln_or_neg_inf, weighted_log};
use crate::pdf::GridPdf;

/// A normalized fusion result together with the log of the normalizer that
/// was divided out (the denormalization term for factorized fusion).
#[derive(Debug, Clone, PartialEq)]
pub struct FusedMasses {
    pub mass: Vec<f64>,
    pub log_norm: f64,
}

impl FusedMasses {
    fn from_log(log_mass: Vec<f64>) -> Result<Self> {
        let max = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DisjointSupports);
        }
        let mut mass: Vec<f64> = log_mass.iter().map(|l| math::exp(l - max)).collect();
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self { mass, log_norm: max + math::ln(total) })
    }
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(alloc::format!("{} vs {} cells", a.len(), b.len())));
    }
    Ok(())
}

fn check_omega(omega: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::InvalidParameter(alloc::format!("omega {omega} outside [0, 1]")));
    }
    Ok(())
}

/// Cellwise `p_i p_j / p_c`, normalized. `log_norm` is `ln sum(p_i p_j / p_c)`.
pub fn exact_product(p_i: &[f64], p_j: &[f64], p_c: &[f64]) -> Result<FusedMasses> {
    check_len(p_i, p_j)?;
    check_len(p_i, p_c)?;
    let mut log_mass = Vec::with_capacity(p_i.len());
    for (cell, ((&a, &b), &c)) in p_i.iter().zip(p_j).zip(p_c).enumerate() {
        if a > 0.0 && b > 0.0 {
            if !(c > 0.0) {
                return Err(Error::InconsistentCommonInformation { cell });
            }
            log_mass.push(math::ln(a) + math::ln(b) - math::ln(c));
        } else {
            log_mass.push(f64::NEG_INFINITY);
        }
    }
    FusedMasses::from_log(log_mass)
}

/// Cellwise `p_i^ω p_j^(1-ω)`, normalized, with `0^0 = 1`. The endpoints
/// return the selected input unchanged.
pub fn power_product(p_i: &[f64], p_j: &[f64], omega: f64) -> Result<FusedMasses> {
    check_len(p_i, p_j)?;
    check_omega(omega)?;
    if omega == 1.0 || omega == 0.0 {
        let src = if omega == 1.0 { p_i } else { p_j };
        let total: f64 = src.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DisjointSupports);
        }
        return Ok(FusedMasses { mass: src.to_vec(), log_norm: math::ln(total) });
    }
    let log_mass = p_i
        .iter()
        .zip(p_j)
        .map(|(&a, &b)| weighted_log(omega, ln_or_neg_inf(a)) + weighted_log(1.0 - omega, ln_or_neg_inf(b)))
        .collect();
    FusedMasses::from_log(log_mass)
}

/// Exact decentralized fusion `p_i p_j / p_c` on a common grid.
pub fn exact_fuse(p_i: &GridPdf, p_j: &GridPdf, p_c: &GridPdf) -> Result<GridPdf> {
    p_i.check_same_grid(p_j)?;
    p_i.check_same_grid(p_c)?;
    let fused = exact_product(p_i.mass(), p_j.mass(), p_c.mass())?;
    Ok(GridPdf::from_normalized_unchecked(p_i.grid().clone(), fused.mass))
}

/// Weighted exponential product `p_i^ω p_j^(1-ω)`.
pub fn wep_fuse(p_i: &GridPdf, p_j: &GridPdf, omega: f64) -> Result<GridPdf> {
    p_i.check_same_grid(p_j)?;
    let fused = power_product(p_i.mass(), p_j.mass(), omega)?;
    Ok(GridPdf::from_normalized_unchecked(p_i.grid().clone(), fused.mass))
}

/// Conservative common-information estimate `p_i^(1-ω) p_j^ω`; dividing it
/// out of `p_i p_j` reproduces [`wep_fuse`] at the same `ω`.
pub fn estimate_common_info(p_i: &GridPdf, p_j: &GridPdf, omega: f64) -> Result<GridPdf> {
    p_i.check_same_grid(p_j)?;
    check_omega(omega)?;
    let fused = power_product(p_i.mass(), p_j.mass(), 1.0 - omega)?;
    Ok(GridPdf::from_normalized_unchecked(p_i.grid().clone(), fused.mass))
}
