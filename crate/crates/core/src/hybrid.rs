//! Factorized fusion of hybrid beliefs `p(x, R) = p(x | R) p(R)`.
//!
//! Each region `R` carries its own conditional grid pdf. Fusion runs per
//! region on the conditionals; the region distribution is then reassembled
//! with the per-region denormalization terms (the integral of the
//! unnormalized conditional fusion product), which makes the result equal
//! to fusing the flattened joint directly.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fusion::{exact_product, optimize_omega, optimize_omega_masses, power_product, OmegaCost};
use crate::math::{self, ln_or_neg_inf, weighted_log};
use crate::pdf::{kld_masses, DiscreteDist, GridPdf};
use crate::sensor::{dist_sq, Detection, SensorModel};

/// Cellwise tolerance for "this factor carries new information".
pub const CHANGE_TOL: f64 = 1e-12;

/// A region distribution plus one conditional pdf per region.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBelief<C = GridPdf> {
    regions: DiscreteDist,
    conditionals: Vec<C>,
}

impl<C> HybridBelief<C> {
    pub fn regions(&self) -> &DiscreteDist {
        &self.regions
    }

    pub fn conditionals(&self) -> &[C] {
        &self.conditionals
    }

    pub fn conditional(&self, region: usize) -> &C {
        &self.conditionals[region]
    }

    pub fn n_regions(&self) -> usize {
        self.conditionals.len()
    }

    pub fn into_parts(self) -> (DiscreteDist, Vec<C>) {
        (self.regions, self.conditionals)
    }
}

impl<C: crate::pdf::LogDensity> HybridBelief<C> {
    /// Builds a belief over mixture (or other parametric) conditionals.
    pub fn new_parametric(regions: DiscreteDist, conditionals: Vec<C>) -> Result<Self> {
        check_region_count(&regions, conditionals.len())?;
        let d = conditionals[0].dim();
        for c in &conditionals {
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.dim() });
            }
        }
        Ok(Self { regions, conditionals })
    }
}

fn check_region_count(regions: &DiscreteDist, n: usize) -> Result<()> {
    if n == 0 || regions.len() != n {
        return Err(Error::InvalidParameter(alloc::format!(
            "{} region probabilities for {} conditionals",
            regions.len(),
            n
        )));
    }
    Ok(())
}

impl HybridBelief<GridPdf> {
    /// Conditionals may live on different grids (e.g. per-region bounding
    /// boxes) but must share the dimension.
    pub fn new(regions: DiscreteDist, conditionals: Vec<GridPdf>) -> Result<Self> {
        check_region_count(&regions, conditionals.len())?;
        let d = conditionals[0].grid().ndim();
        for c in &conditionals {
            if c.grid().ndim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.grid().ndim() });
            }
        }
        Ok(Self { regions, conditionals })
    }

    pub fn total_cells(&self) -> usize {
        self.conditionals.iter().map(GridPdf::len).sum()
    }

    /// Joint masses `p(r) p(cell | r)`, regions concatenated in order.
    pub fn joint_masses(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_cells());
        for (p, c) in self.regions.probs().iter().zip(&self.conditionals) {
            out.extend(c.mass().iter().map(|m| p * m));
        }
        out
    }

    /// Inverse of [`joint_masses`](Self::joint_masses) using `self` for the
    /// grid layout. Regions with zero joint mass keep `self`'s conditional.
    pub fn with_joint_masses(&self, joint: &[f64]) -> Result<Self> {
        if joint.len() != self.total_cells() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} joint cells for a belief with {}",
                joint.len(),
                self.total_cells()
            )));
        }
        let mut offset = 0;
        let mut weights = Vec::with_capacity(self.n_regions());
        let mut conditionals = Vec::with_capacity(self.n_regions());
        for c in &self.conditionals {
            let block = &joint[offset..offset + c.len()];
            offset += c.len();
            let s: f64 = block.iter().sum();
            weights.push(s);
            if s > 0.0 {
                conditionals.push(GridPdf::from_masses(c.grid().clone(), block.to_vec())?);
            } else {
                conditionals.push(c.clone());
            }
        }
        Ok(Self { regions: DiscreteDist::from_weights(weights)?, conditionals })
    }

    /// Entropy of the joint in nats.
    pub fn entropy(&self) -> f64 {
        crate::pdf::entropy(&self.joint_masses())
    }

    /// Regions whose conditional differs from `other`'s by more than
    /// [`CHANGE_TOL`] in some cell.
    pub fn changed_regions(&self, other: &Self) -> Vec<usize> {
        (0..self.n_regions()).filter(|&r| conditional_changed(&self.conditionals[r], &other.conditionals[r])).collect()
    }

    pub fn region_weights_changed(&self, other: &Self) -> bool {
        masses_changed(self.regions.probs(), other.regions.probs())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_regions() != other.n_regions() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} vs {} regions",
                self.n_regions(),
                other.n_regions()
            )));
        }
        for (a, b) in self.conditionals.iter().zip(&other.conditionals) {
            a.check_same_grid(b)?;
        }
        Ok(())
    }
}

fn masses_changed(a: &[f64], b: &[f64]) -> bool {
    a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > CHANGE_TOL)
}

fn conditional_changed(a: &GridPdf, b: &GridPdf) -> bool {
    a.grid() != b.grid() || masses_changed(a.mass(), b.mass())
}

/// Which factors take part in an exchange.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FactorSelector {
    regions: Vec<usize>,
    pub include_region_weights: bool,
}

impl FactorSelector {
    pub fn new(mut regions: Vec<usize>, include_region_weights: bool) -> Self {
        regions.sort_unstable();
        regions.dedup();
        Self { regions, include_region_weights }
    }

    /// Every region plus the region weights.
    pub fn all(n_regions: usize) -> Self {
        Self::new((0..n_regions).collect(), true)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn regions(&self) -> &[usize] {
        &self.regions
    }

    pub fn contains(&self, region: usize) -> bool {
        self.regions.binary_search(&region).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty() && !self.include_region_weights
    }

    pub fn validate(&self, n_regions: usize) -> Result<()> {
        match self.regions.iter().find(|&&r| r >= n_regions) {
            Some(r) => Err(Error::InvalidParameter(alloc::format!(
                "selector region {r} out of range for {n_regions} regions"
            ))),
            None => Ok(()),
        }
    }
}

/// WEP weights: one for the region distribution and one per conditional.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaAssignment {
    pub region: f64,
    pub conditional: Vec<f64>,
}

impl OmegaAssignment {
    pub fn new(region: f64, conditional: Vec<f64>) -> Result<Self> {
        let a = Self { region, conditional };
        a.validate()?;
        Ok(a)
    }

    /// The same `ω` for every factor (whole-joint WEP).
    pub fn tied(omega: f64, n_regions: usize) -> Result<Self> {
        Self::new(omega, alloc::vec![omega; n_regions])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = core::iter::once(&self.region).chain(&self.conditional).find(|w| !(0.0..=1.0).contains(*w));
        match bad {
            Some(w) => Err(Error::InvalidParameter(alloc::format!("omega {w} outside [0, 1]"))),
            None => Ok(()),
        }
    }

    /// Per-factor minimax weights.
    ///
    /// With `shared_prior`, a conditional only one side has changed relative
    /// to the prior is taken from that side outright (`ω = 1` for `b_i`,
    /// `ω = 0` for `b_j`); otherwise each conditional and the region
    /// distribution get their own minimax-optimal `ω`.
    pub fn minimax(
        b_i: &HybridBelief,
        b_j: &HybridBelief,
        shared_prior: Option<&HybridBelief>,
        cost: &OmegaCost,
    ) -> Result<Self> {
        b_i.check_compatible(b_j)?;
        let mut conditional = Vec::with_capacity(b_i.n_regions());
        for r in 0..b_i.n_regions() {
            let (ci, cj) = (b_i.conditional(r), b_j.conditional(r));
            let omega = match shared_prior.map(|p| p.conditional(r)) {
                Some(p) if !conditional_changed(cj, p) && conditional_changed(ci, p) => 1.0,
                Some(p) if !conditional_changed(ci, p) && conditional_changed(cj, p) => 0.0,
                _ => optimize_omega(ci, cj, cost)?,
            };
            conditional.push(omega);
        }
        let region = optimize_omega_masses(b_i.regions().probs(), b_j.regions().probs(), cost)?;
        Self::new(region, conditional)
    }
}

/// Fused belief plus the per-region log denormalization terms.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedFusion {
    pub belief: HybridBelief,
    pub log_eta: Vec<f64>,
}

/// Local Bayes update of a hybrid belief with one detector reading.
///
/// Regions whose positive-mass cells are all outside the sensor footprint
/// are left untouched (their conditional cannot be informed by the reading).
/// For a detection, such regions get zero marginal likelihood.
pub fn hybrid_local_update(
    b: &HybridBelief,
    outcome: Detection,
    sensor: &SensorModel,
    pose: &[f64],
) -> Result<HybridBelief> {
    sensor.validate()?;
    let mut conditionals = Vec::with_capacity(b.n_regions());
    let mut log_lik = Vec::with_capacity(b.n_regions());
    let mut any_informative = false;
    for c in &b.conditionals {
        if c.grid().ndim() != pose.len() {
            return Err(Error::DimensionMismatch { expected: c.grid().ndim(), found: pose.len() });
        }
        let mut updated = c.mass().to_vec();
        let mut sensed = false;
        let mut marginal = 0.0;
        c.grid().for_each_center(|i, x| {
            let pd = sensor.detection_probability(dist_sq(x, pose));
            if pd > 0.0 && updated[i] > 0.0 {
                sensed = true;
            }
            let l = match outcome {
                Detection::Detected => pd,
                Detection::NotDetected => 1.0 - pd,
            };
            updated[i] *= l;
            marginal += updated[i];
        });
        if !sensed {
            conditionals.push(c.clone());
            log_lik.push(match outcome {
                Detection::NotDetected => 0.0,
                Detection::Detected => f64::NEG_INFINITY,
            });
            if outcome == Detection::Detected {
                any_informative = true;
            }
            continue;
        }
        any_informative = true;
        if marginal > 0.0 {
            updated.iter_mut().for_each(|m| *m /= marginal);
            conditionals.push(GridPdf::from_normalized_unchecked(c.grid().clone(), updated));
        } else {
            conditionals.push(c.clone());
        }
        log_lik.push(ln_or_neg_inf(marginal));
    }
    if !any_informative {
        return Ok(b.clone());
    }
    let log_w: Vec<f64> = b.regions.probs().iter().zip(&log_lik).map(|(p, l)| ln_or_neg_inf(*p) + l).collect();
    let probs = math::normalize_log_masses(&log_w).ok_or(Error::ZeroMarginalLikelihood)?;
    Ok(HybridBelief { regions: DiscreteDist::from_normalized_unchecked(probs), conditionals })
}

/// Factorized exact fusion `p_i p_j / p_c` of hybrid beliefs.
///
/// Selected regions are fused conditionally; if one side's conditional is
/// still the common one, the other side's is copied verbatim (denormalization
/// term exactly one). Unselected regions keep `b_i`'s conditional and require
/// `b_j` to hold no new information there.
pub fn hybrid_exact_fuse(
    b_i: &HybridBelief,
    b_j: &HybridBelief,
    b_c: &HybridBelief,
    select: &FactorSelector,
) -> Result<FactorizedFusion> {
    b_i.check_compatible(b_j)?;
    b_i.check_compatible(b_c)?;
    select.validate(b_i.n_regions())?;
    if !select.include_region_weights && b_j.region_weights_changed(b_c) {
        return Err(Error::IncompleteRegionWeights);
    }

    let mut conditionals = Vec::with_capacity(b_i.n_regions());
    let mut log_eta = Vec::with_capacity(b_i.n_regions());
    for r in 0..b_i.n_regions() {
        let (ci, cj, cc) = (b_i.conditional(r), b_j.conditional(r), b_c.conditional(r));
        if !select.contains(r) {
            if conditional_changed(cj, cc) {
                return Err(Error::IncompleteFusion { region: r });
            }
            conditionals.push(ci.clone());
            log_eta.push(0.0);
        } else if ci.mass() == cc.mass() {
            conditionals.push(cj.clone());
            log_eta.push(0.0);
        } else if cj.mass() == cc.mass() {
            conditionals.push(ci.clone());
            log_eta.push(0.0);
        } else {
            let fused = exact_product(ci.mass(), cj.mass(), cc.mass()).map_err(|e| match e {
                Error::DisjointSupports => Error::DegenerateDensity,
                other => other,
            })?;
            conditionals.push(GridPdf::from_normalized_unchecked(ci.grid().clone(), fused.mass));
            log_eta.push(fused.log_norm);
        }
    }

    let mut log_w = Vec::with_capacity(b_i.n_regions());
    for r in 0..b_i.n_regions() {
        let (pi, pj, pc) = (b_i.regions.probs()[r], b_j.regions.probs()[r], b_c.regions.probs()[r]);
        if pi > 0.0 && pj > 0.0 {
            if !(pc > 0.0) {
                return Err(Error::InconsistentCommonInformation { cell: r });
            }
            log_w.push(math::ln(pi) + math::ln(pj) - math::ln(pc) + log_eta[r]);
        } else {
            log_w.push(f64::NEG_INFINITY);
        }
    }
    let probs = math::normalize_log_masses(&log_w).ok_or(Error::DisjointSupports)?;
    Ok(FactorizedFusion {
        belief: HybridBelief { regions: DiscreteDist::from_normalized_unchecked(probs), conditionals },
        log_eta,
    })
}

/// Factorized WEP fusion with a separate `ω` per factor.
///
/// The denormalization term of a fused conditional is
/// `sum p_i^ω p_j^(1-ω)`, so tying every `ω` reproduces whole-joint WEP.
/// Unselected regions keep `b_i`'s conditional.
pub fn hybrid_wep_fuse(
    b_i: &HybridBelief,
    b_j: &HybridBelief,
    omegas: &OmegaAssignment,
    select: &FactorSelector,
) -> Result<FactorizedFusion> {
    b_i.check_compatible(b_j)?;
    omegas.validate()?;
    select.validate(b_i.n_regions())?;
    if omegas.conditional.len() != b_i.n_regions() {
        return Err(Error::InvalidParameter(alloc::format!(
            "{} conditional omegas for {} regions",
            omegas.conditional.len(),
            b_i.n_regions()
        )));
    }

    let mut conditionals = Vec::with_capacity(b_i.n_regions());
    let mut log_eta = Vec::with_capacity(b_i.n_regions());
    for r in 0..b_i.n_regions() {
        let (ci, cj) = (b_i.conditional(r), b_j.conditional(r));
        if !select.contains(r) || ci.mass() == cj.mass() {
            conditionals.push(ci.clone());
            log_eta.push(0.0);
            continue;
        }
        let fused = power_product(ci.mass(), cj.mass(), omegas.conditional[r])?;
        conditionals.push(GridPdf::from_normalized_unchecked(ci.grid().clone(), fused.mass));
        log_eta.push(fused.log_norm);
    }

    let region_source: &DiscreteDist = if select.include_region_weights { &b_j.regions } else { &b_i.regions };
    let log_w: Vec<f64> = b_i
        .regions
        .probs()
        .iter()
        .zip(region_source.probs())
        .zip(&log_eta)
        .map(|((&pi, &pj), eta)| {
            let w = weighted_log(omegas.region, ln_or_neg_inf(pi)) + weighted_log(1.0 - omegas.region, ln_or_neg_inf(pj));
            if w == f64::NEG_INFINITY {
                w
            } else {
                w + eta
            }
        })
        .collect();
    let probs = math::normalize_log_masses(&log_w).ok_or(Error::DisjointSupports)?;
    Ok(FactorizedFusion {
        belief: HybridBelief { regions: DiscreteDist::from_normalized_unchecked(probs), conditionals },
        log_eta,
    })
}

/// Whole-joint WEP: a single `ω` applied to the flattened `(x, R)` masses.
pub fn whole_joint_wep_fuse(b_i: &HybridBelief, b_j: &HybridBelief, omega: f64) -> Result<HybridBelief> {
    b_i.check_compatible(b_j)?;
    let fused = power_product(&b_i.joint_masses(), &b_j.joint_masses(), omega)?;
    b_i.with_joint_masses(&fused.mass)
}

/// Decomposed joint KL divergence `KL(truth || approx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointKld {
    pub total: f64,
    pub region_term: f64,
    /// `KL(truth(x | r) || approx(x | r))` per region (unweighted).
    pub per_region: Vec<f64>,
}

/// `KL(p(R) || q(R)) + sum_r p(r) KL(p(x | r) || q(x | r))`, with the
/// conditional terms weighted by the truth's region probabilities.
pub fn hybrid_joint_kld(truth: &HybridBelief, approx: &HybridBelief) -> Result<JointKld> {
    truth.check_compatible(approx)?;
    let region_term = truth.regions.kld(&approx.regions)?;
    let mut per_region = Vec::with_capacity(truth.n_regions());
    let mut total = region_term;
    for r in 0..truth.n_regions() {
        let p_r = truth.regions.probs()[r];
        let k = if p_r > 0.0 {
            kld_masses(truth.conditional(r).mass(), approx.conditional(r).mass())?
        } else {
            0.0
        };
        total += p_r * k;
        per_region.push(k);
    }
    Ok(JointKld { total, region_term, per_region })
}

/// One point of an `ω_R` sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub omega_region: f64,
    pub kld_total: f64,
    pub kld_region_term: f64,
}

/// Loss curves against exact fusion for factorized WEP (conditional `ω`s
/// fixed, `ω_R` swept) and whole-joint WEP (all `ω` tied to the swept value).
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSweep {
    pub exact: HybridBelief,
    pub factorized: Vec<SweepPoint>,
    pub whole_joint: Vec<SweepPoint>,
}

impl OmegaSweep {
    pub fn best_factorized(&self) -> Option<SweepPoint> {
        best(&self.factorized)
    }

    pub fn best_whole_joint(&self) -> Option<SweepPoint> {
        best(&self.whole_joint)
    }
}

fn best(points: &[SweepPoint]) -> Option<SweepPoint> {
    points.iter().copied().filter(|p| p.kld_total.is_finite()).min_by(|a, b| a.kld_total.total_cmp(&b.kld_total))
}

pub fn omega_r_sweep(
    b_i: &HybridBelief,
    b_j: &HybridBelief,
    b_c: &HybridBelief,
    conditional_omegas: &[f64],
    omega_grid: &[f64],
) -> Result<OmegaSweep> {
    let all = FactorSelector::all(b_i.n_regions());
    let exact = hybrid_exact_fuse(b_i, b_j, b_c, &all)?.belief;
    let mut factorized = Vec::with_capacity(omega_grid.len());
    let mut whole_joint = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        let assignment = OmegaAssignment::new(w, conditional_omegas.to_vec())?;
        let fac = hybrid_wep_fuse(b_i, b_j, &assignment, &all)?.belief;
        factorized.push(sweep_point(w, &exact, &fac));
        let whole = whole_joint_wep_fuse(b_i, b_j, w)?;
        whole_joint.push(sweep_point(w, &exact, &whole));
    }
    Ok(OmegaSweep { exact, factorized, whole_joint })
}

fn sweep_point(omega_region: f64, exact: &HybridBelief, approx: &HybridBelief) -> SweepPoint {
    match hybrid_joint_kld(exact, approx) {
        Ok(k) => SweepPoint { omega_region, kld_total: k.total, kld_region_term: k.region_term },
        Err(_) => SweepPoint { omega_region, kld_total: f64::INFINITY, kld_region_term: f64::INFINITY },
    }
}
