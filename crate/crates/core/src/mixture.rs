//! Gaussian-mixture fusion.
//!
//! Fusing two mixtures against a common-information density `u` gives
//! `sum_qr w_q w_r z_qr N(x; μ_qr, Σ_qr) / u(x)`: a mixture of non-Gaussian
//! ratio terms. Each ratio term is replaced by a moment-matched Gaussian whose
//! mass, mean and covariance are estimated by importance sampling from a
//! Gaussian proposal centred on the numerator product.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{self, weighted_log};
use crate::pdf::{gaussian_product, symmetrize, Gaussian, GaussianMixture, LogDensity};

/// Fixed default seed so unconfigured runs are reproducible.
pub const DEFAULT_SEED: u64 = 0x5eed_0ddf;

/// Largest dimension for which the determinant-based proposal rule is used
/// without an explicit override.
pub const MAX_PROPOSAL_DIM: usize = 5;

const MIN_SAMPLES: usize = 100;
const LOW_ESS: f64 = 10.0;
const TAIL_RATIO: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Moment-matches ratio components on the rayon pool when the
    /// `parallel` feature is enabled; falls back to sequential otherwise.
    #[default]
    Parallel,
}

/// Tuning for [`gm_fuse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    /// Importance samples per ratio component.
    pub n_samples: usize,
    /// Default proposal variance `α` (the proposal candidate is `α I`).
    pub alpha: f64,
    /// Components whose share of the total base weight is below this are
    /// dropped before sampling.
    pub prune_threshold: f64,
    pub seed: u64,
    pub execution: Execution,
    /// Permit the proposal rule above [`MAX_PROPOSAL_DIM`] dimensions.
    pub allow_high_dimension: bool,
}

impl FusionParams {
    pub fn new(alpha: f64) -> Self {
        Self {
            n_samples: 2000,
            alpha,
            prune_threshold: 1e-6,
            seed: DEFAULT_SEED,
            execution: Execution::default(),
            allow_high_dimension: false,
        }
    }

    /// Defaults with `α = (width / 4)²` for a domain of the given width.
    pub fn for_domain_width(width: f64) -> Self {
        Self::new((width / 4.0) * (width / 4.0))
    }

    pub fn with_samples(mut self, n_samples: usize) -> Self {
        self.n_samples = n_samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_prune_threshold(mut self, t: f64) -> Self {
        self.prune_threshold = t;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::InvalidParameter(alloc::format!(
                "n_samples {} below minimum {MIN_SAMPLES}",
                self.n_samples
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("alpha {} must be positive", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            return Err(Error::InvalidParameter(alloc::format!(
                "prune threshold {} outside [0, 1)",
                self.prune_threshold
            )));
        }
        Ok(())
    }
}

/// One term `w_q w_r z_qr N(x; μ_qr, Σ_qr) / u(x)` of the fused mixture.
#[derive(Debug, Clone)]
pub struct RatioComponent<'u, U: ?Sized> {
    pub q: usize,
    pub r: usize,
    /// `ln w_q + ln w_r + ln z_qr`.
    pub base_log_weight: f64,
    /// Normalized numerator product `N(μ_qr, Σ_qr)`.
    pub gaussian: Gaussian,
    pub denominator: &'u U,
}

/// All pairwise numerator products, `q`-major. Pairs with a zero input
/// weight carry no mass and are omitted.
pub fn build_ratio_components<'u, U: LogDensity + ?Sized>(
    p_i: &GaussianMixture,
    p_j: &GaussianMixture,
    u: &'u U,
) -> Result<Vec<RatioComponent<'u, U>>> {
    if p_i.dim() != p_j.dim() {
        return Err(Error::DimensionMismatch { expected: p_i.dim(), found: p_j.dim() });
    }
    if u.dim() != p_i.dim() {
        return Err(Error::DimensionMismatch { expected: p_i.dim(), found: u.dim() });
    }
    let mut out = Vec::with_capacity(p_i.len() * p_j.len());
    for (q, ci) in p_i.components().iter().enumerate() {
        for (r, cj) in p_j.components().iter().enumerate() {
            if ci.weight == 0.0 || cj.weight == 0.0 {
                continue;
            }
            let (gaussian, log_z) = gaussian_product(&ci.gaussian, &cj.gaussian)?;
            out.push(RatioComponent {
                q,
                r,
                base_log_weight: math::ln(ci.weight) + math::ln(cj.weight) + log_z,
                gaussian,
                denominator: u,
            });
        }
    }
    Ok(out)
}

/// Proposal `N(μ_qr, Σ_samp)` where `Σ_samp` is whichever of `Σ_q`, `Σ_r`
/// and `α I` has the largest determinant (ties keep the earlier one).
pub fn select_proposal<U: ?Sized>(
    comp: &RatioComponent<'_, U>,
    mixand_i: &Gaussian,
    mixand_j: &Gaussian,
    alpha: f64,
) -> Result<Gaussian> {
    let d = comp.gaussian.dim();
    if d > MAX_PROPOSAL_DIM {
        return Err(Error::ProposalOutOfRange { dim: d });
    }
    select_proposal_unchecked(comp, mixand_i, mixand_j, alpha)
}

/// [`select_proposal`] without the dimension guard.
pub fn select_proposal_unchecked<U: ?Sized>(
    comp: &RatioComponent<'_, U>,
    mixand_i: &Gaussian,
    mixand_j: &Gaussian,
    alpha: f64,
) -> Result<Gaussian> {
    let d = comp.gaussian.dim();
    mixand_i.check_dim(d)?;
    mixand_j.check_dim(d)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("alpha {alpha} must be positive")));
    }
    let log_det_default = d as f64 * math::ln(alpha);
    let mut best = (mixand_i.log_det(), mixand_i.cov());
    if mixand_j.log_det() > best.0 {
        best = (mixand_j.log_det(), mixand_j.cov());
    }
    let cov = if log_det_default > best.0 {
        DMatrix::identity(d, d) * alpha
    } else {
        best.1.clone()
    };
    Gaussian::new(comp.gaussian.mean().clone(), cov)
}

/// Sampling-quality indicators for one moment-matched component.
#[derive(Debug, Clone, PartialEq)]
pub struct IsDiagnostics {
    pub effective_sample_size: f64,
    /// ESS below 10: the estimate is unreliable.
    pub low_ess: bool,
    /// Some sample's numerator-to-`u` ratio exceeded the ratio at the
    /// component centre by more than 1e6: `u` decays faster than the
    /// numerator and the moments may not exist.
    pub tail_blowup: bool,
    /// Standard error of each coordinate of the estimated mean.
    pub mean_std_error: Vec<f64>,
}

/// Moment-matched replacement for one ratio component.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatch {
    pub q: usize,
    pub r: usize,
    /// `ln w*_qr`, before division by the global normalizer.
    pub log_weight: f64,
    pub gaussian: Gaussian,
    pub diagnostics: IsDiagnostics,
}

/// Independent RNG stream for component `(q, r)`.
pub fn component_rng(seed: u64, q: usize, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((q as u64) << 32) | (r as u64 & 0xffff_ffff));
    rng
}

/// Estimates the mass, mean and covariance of a ratio component by
/// importance sampling from `proposal`.
///
/// The mass uses the plain average of the raw importance ratios; mean and
/// covariance use self-normalized weights.
pub fn is_moment_match<U: LogDensity + ?Sized>(
    comp: &RatioComponent<'_, U>,
    proposal: &Gaussian,
    n_samples: usize,
    seed: u64,
) -> Result<MomentMatch> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(alloc::format!("n_samples {n_samples} below minimum {MIN_SAMPLES}")));
    }
    let d = comp.gaussian.dim();
    proposal.check_dim(d)?;
    let mut rng = component_rng(seed, comp.q, comp.r);

    let centre = comp.gaussian.mean().as_slice();
    let centre_ratio = comp.gaussian.log_pdf(centre) - comp.denominator.log_density(centre);

    let mut xs: Vec<f64> = Vec::with_capacity(n_samples * d);
    let mut log_ratio: Vec<f64> = Vec::with_capacity(n_samples);
    let mut tail_blowup = false;
    for _ in 0..n_samples {
        let x = proposal.sample(&mut rng);
        let num = comp.gaussian.log_pdf(x.as_slice());
        let den = comp.denominator.log_density(x.as_slice());
        if den.is_nan() || den == f64::INFINITY {
            return Err(Error::InvalidParameter("common-information log-density is NaN or +inf".into()));
        }
        if den == f64::NEG_INFINITY && num > f64::NEG_INFINITY {
            return Err(Error::InconsistentCommonDensity { q: comp.q, r: comp.r });
        }
        let num_over_u = num - den;
        if centre_ratio.is_finite() && num_over_u - centre_ratio > math::ln(TAIL_RATIO) {
            tail_blowup = true;
        }
        log_ratio.push(num_over_u - proposal.log_pdf(x.as_slice()));
        xs.extend_from_slice(x.as_slice());
    }

    let max = log_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ProposalMissesSupport { q: comp.q, r: comp.r });
    }
    let mut theta: Vec<f64> = log_ratio.iter().map(|l| math::exp(l - max)).collect();
    let sum: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= sum);
    let log_mean_ratio = max + math::ln(sum) - math::ln(n_samples as f64);

    let mut mean = DVector::zeros(d);
    for (s, t) in theta.iter().enumerate() {
        for k in 0..d {
            mean[k] += t * xs[s * d + k];
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    let mut se2 = alloc::vec![0.0; d];
    for (s, t) in theta.iter().enumerate() {
        let x = &xs[s * d..(s + 1) * d];
        for a in 0..d {
            let da = x[a] - mean[a];
            se2[a] += t * t * da * da;
            for b in 0..=a {
                cov[(a, b)] += t * da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let cov = regularize(cov);
    let ess = 1.0 / theta.iter().map(|t| t * t).sum::<f64>();

    Ok(MomentMatch {
        q: comp.q,
        r: comp.r,
        log_weight: comp.base_log_weight + log_mean_ratio,
        gaussian: Gaussian::new(mean, cov)?,
        diagnostics: IsDiagnostics {
            effective_sample_size: ess,
            low_ess: ess < LOW_ESS,
            tail_blowup,
            mean_std_error: se2.into_iter().map(math::sqrt).collect(),
        },
    })
}

fn regularize(cov: DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let cov = symmetrize(cov);
    let jitter = 1e-9 * cov.trace() / d as f64;
    cov + DMatrix::identity(d, d) * jitter
}

/// Result of [`gm_fuse`]: the fused mixture plus per-component records.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFusion {
    pub mixture: GaussianMixture,
    /// Moment-matched components in `q`-major order (pruned ones omitted).
    pub components: Vec<MomentMatch>,
    pub pruned: usize,
    /// Share of the total base weight that pruning discarded.
    pub discarded_fraction: f64,
}

impl MixtureFusion {
    pub fn low_ess_count(&self) -> usize {
        self.components.iter().filter(|c| c.diagnostics.low_ess).count()
    }

    pub fn tail_blowup_count(&self) -> usize {
        self.components.iter().filter(|c| c.diagnostics.tail_blowup).count()
    }
}

/// Approximates `p_i p_j / u` by a Gaussian mixture with one moment-matched
/// component per surviving `(q, r)` pair, normalized by the total mass.
pub fn gm_fuse<U: LogDensity + Sync + ?Sized>(
    p_i: &GaussianMixture,
    p_j: &GaussianMixture,
    u: &U,
    params: &FusionParams,
) -> Result<MixtureFusion> {
    params.validate()?;
    let d = p_i.dim();
    if d > MAX_PROPOSAL_DIM && !params.allow_high_dimension {
        return Err(Error::ProposalOutOfRange { dim: d });
    }
    let all = build_ratio_components(p_i, p_j, u)?;
    if all.is_empty() {
        return Err(Error::AllComponentsPruned);
    }
    let base: Vec<f64> = all.iter().map(|c| c.base_log_weight).collect();
    let total = math::log_sum_exp(&base);
    if !total.is_finite() {
        return Err(Error::AllComponentsPruned);
    }

    let mut kept = Vec::with_capacity(all.len());
    let mut discarded_fraction = 0.0;
    let mut pruned = 0;
    for comp in all {
        let fraction = math::exp(comp.base_log_weight - total);
        if fraction < params.prune_threshold {
            discarded_fraction += fraction;
            pruned += 1;
        } else {
            kept.push(comp);
        }
    }
    if kept.is_empty() {
        return Err(Error::AllComponentsPruned);
    }

    let match_one = |comp: &RatioComponent<'_, U>| -> Result<MomentMatch> {
        let mi = &p_i.components()[comp.q].gaussian;
        let mj = &p_j.components()[comp.r].gaussian;
        let proposal = select_proposal_unchecked(comp, mi, mj, params.alpha)?;
        is_moment_match(comp, &proposal, params.n_samples, params.seed)
    };
    let matched: Vec<MomentMatch> = run_all(&kept, params.execution, match_one)?;

    let mixture = GaussianMixture::from_log_weights(
        matched.iter().map(|m| (m.log_weight, m.gaussian.clone())).collect(),
    )?;
    Ok(MixtureFusion { mixture, components: matched, pruned, discarded_fraction })
}

#[cfg(feature = "parallel")]
fn run_all<T, R, F>(items: &[T], execution: Execution, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    match execution {
        Execution::Parallel => items.par_iter().map(&f).collect(),
        Execution::Sequential => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all<T, R, F>(items: &[T], _execution: Execution, f: F) -> Result<Vec<R>>
where
    F: Fn(&T) -> Result<R>,
{
    items.iter().map(f).collect()
}

/// Unnormalized WEP common-information estimate
/// `ln u(x) = (1 - ω) ln p_i(x) + ω ln p_j(x)`.
#[derive(Debug, Clone, Copy)]
pub struct WepCommonDensity<'a> {
    pub p_i: &'a GaussianMixture,
    pub p_j: &'a GaussianMixture,
    pub omega: f64,
}

impl LogDensity for WepCommonDensity<'_> {
    fn dim(&self) -> usize {
        self.p_i.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        weighted_log(1.0 - self.omega, self.p_i.log_pdf(x)) + weighted_log(self.omega, self.p_j.log_pdf(x))
    }
}

/// GM approximation of the WEP fusion `p_i^ω p_j^(1-ω)`.
pub fn gm_wep_fuse(
    p_i: &GaussianMixture,
    p_j: &GaussianMixture,
    omega: f64,
    params: &FusionParams,
) -> Result<MixtureFusion> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::InvalidParameter(alloc::format!("omega {omega} outside [0, 1]")));
    }
    if p_i.dim() != p_j.dim() {
        return Err(Error::DimensionMismatch { expected: p_i.dim(), found: p_j.dim() });
    }
    let u = WepCommonDensity { p_i, p_j, omega };
    gm_fuse(p_i, p_j, &u, params)
}

/// GM approximation of exact fusion `p_i p_j / p_c`.
pub fn gm_exact_fuse(
    p_i: &GaussianMixture,
    p_j: &GaussianMixture,
    p_c: &GaussianMixture,
    params: &FusionParams,
) -> Result<MixtureFusion> {
    gm_fuse(p_i, p_j, p_c, params)
}
