use crate::error::{Error, Result};
use crate::pdf::{kld_masses, GridPdf};

use super::rules::power_product;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Functional minimized when choosing the WEP weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaCriterion {
    /// `min_ω max(KL(p_ω || p_i), KL(p_ω || p_j))`.
    MinimaxKld,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaCost {
    pub criterion: OmegaCriterion,
    pub tolerance: f64,
}

impl Default for OmegaCost {
    fn default() -> Self {
        Self { criterion: OmegaCriterion::MinimaxKld, tolerance: 1e-4 }
    }
}

impl OmegaCost {
    pub fn minimax(tolerance: f64) -> Result<Self> {
        let cost = Self { criterion: OmegaCriterion::MinimaxKld, tolerance };
        cost.validate()?;
        Ok(cost)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 0.1) {
            return Err(Error::InvalidParameter(alloc::format!(
                "omega tolerance {} outside (0, 0.1]",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// Cost of fusing with weight `omega`; `+inf` if the fused pdf is not
    /// absolutely continuous with respect to an input.
    pub fn evaluate(&self, p_i: &[f64], p_j: &[f64], omega: f64) -> Result<f64> {
        let fused = power_product(p_i, p_j, omega)?;
        let to_i = kld_masses(&fused.mass, p_i).unwrap_or(f64::INFINITY);
        let to_j = kld_masses(&fused.mass, p_j).unwrap_or(f64::INFINITY);
        Ok(match self.criterion {
            OmegaCriterion::MinimaxKld => to_i.max(to_j),
        })
    }
}

/// Optimal WEP weight for two grid pdfs.
pub fn optimize_omega(p_i: &GridPdf, p_j: &GridPdf, cost: &OmegaCost) -> Result<f64> {
    p_i.check_same_grid(p_j)?;
    optimize_omega_masses(p_i.mass(), p_j.mass(), cost)
}

/// Golden-section search for the cost minimizer on `[0, 1]`. Identical
/// inputs (and exact cost ties) resolve toward `0.5`.
pub fn optimize_omega_masses(p_i: &[f64], p_j: &[f64], cost: &OmegaCost) -> Result<f64> {
    cost.validate()?;
    if p_i.len() != p_j.len() {
        return Err(Error::GridMismatch(alloc::format!("{} vs {} cells", p_i.len(), p_j.len())));
    }
    if p_i.iter().zip(p_j).all(|(a, b)| (a - b).abs() <= 1e-12) {
        return Ok(0.5);
    }
    let f = |w: f64| cost.evaluate(p_i, p_j, w);

    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > cost.tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else if fd < fc {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        } else {
            // tie: shrink both ends so a flat cost stays centred
            a = c;
            b = d;
            c = b - INV_PHI * (b - a);
            d = a + INV_PHI * (b - a);
            fc = f(c)?;
            fd = f(d)?;
        }
    }
    let omega = (0.5 * (a + b)).clamp(0.0, 1.0);

    #[cfg(debug_assertions)]
    {
        let best = f(omega)?;
        let mut scan = (f64::INFINITY, 0.5);
        for k in 0..=100 {
            let w = k as f64 / 100.0;
            let c = f(w)?;
            if c < scan.0 {
                scan = (c, w);
            }
        }
        debug_assert!(
            best <= scan.0 || (omega - scan.1).abs() <= 0.01 + cost.tolerance,
            "golden-section omega {omega} (cost {best}) disagrees with coarse scan {} (cost {}); cost not unimodal",
            scan.1,
            scan.0
        );
    }
    Ok(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdf::Grid;

    fn normal(grid: &Grid, m: f64, v: f64) -> GridPdf {
        GridPdf::from_log_density(grid.clone(), |x| -(x[0] - m) * (x[0] - m) / (2.0 * v)).unwrap()
    }

    #[test]
    fn mirrored_inputs_balance_at_half() {
        let g = Grid::new(alloc::vec![(-5.0, 5.0)], alloc::vec![500]).unwrap();
        let a = normal(&g, -1.5, 1.0);
        let b = normal(&g, 1.5, 1.0);
        let w = optimize_omega(&a, &b, &OmegaCost::default()).unwrap();
        assert!((w - 0.5).abs() < 1e-4);
    }

    #[test]
    fn identical_inputs_tie_to_half() {
        let g = Grid::new(alloc::vec![(-5.0, 5.0)], alloc::vec![50]).unwrap();
        let a = normal(&g, 0.3, 2.0);
        assert_eq!(optimize_omega(&a, &a, &OmegaCost::default()).unwrap(), 0.5);
    }

    #[test]
    fn matches_brute_force_scan() {
        let g = Grid::new(alloc::vec![(-12.0, 12.0)], alloc::vec![1200]).unwrap();
        let a = normal(&g, 0.0, 1.0);
        let b = normal(&g, 0.0, 4.0);
        let cost = OmegaCost::default();
        let w = optimize_omega(&a, &b, &cost).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=10_000 {
            let omega = k as f64 * 1e-4;
            let c = cost.evaluate(a.mass(), b.mass(), omega).unwrap();
            if c < best.0 {
                best = (c, omega);
            }
        }
        assert!((w - best.1).abs() < 1e-3, "golden {w} vs scan {}", best.1);
    }

    #[test]
    fn swapping_inputs_reflects_omega() {
        let g = Grid::new(alloc::vec![(-8.0, 8.0)], alloc::vec![400]).unwrap();
        let a = normal(&g, -1.0, 0.5);
        let b = normal(&g, 2.0, 3.0);
        let cost = OmegaCost::default();
        let w_ab = optimize_omega(&a, &b, &cost).unwrap();
        let w_ba = optimize_omega(&b, &a, &cost).unwrap();
        assert!((w_ab - (1.0 - w_ba)).abs() < 2e-4);
    }

    #[test]
    fn tolerance_validation() {
        assert!(OmegaCost::minimax(0.0).is_err());
        assert!(OmegaCost::minimax(0.5).is_err());
        assert!(OmegaCost::minimax(0.1).is_ok());
    }
}
