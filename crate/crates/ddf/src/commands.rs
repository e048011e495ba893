//! Subcommand implementations. Each writes its artifacts under `out` and
//! returns the summary it also stores as JSON.

use std::path::{Path, PathBuf};

use ddf_core::fusion::{optimize_omega, OmegaCost};
use ddf_core::hybrid::{hybrid_joint_kld, hybrid_wep_fuse, omega_r_sweep, FactorSelector, OmegaAssignment};
use ddf_core::mixture::{gm_exact_fuse, gm_wep_fuse, Execution, FusionParams, MixtureFusion, DEFAULT_SEED};
use ddf_core::pdf::{grid_kld, GaussianMixture, Grid, GridPdf, LogDensity};
use ddf_core::sim::{RunOptions, Scenario, Simulation};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{read_pdf, write_grid_csv_file, write_pdf, Pdf};
use crate::report::{create_dir, write_json, write_run_report, RunSummary};
use crate::scenario::read_scenario;

/// Tolerance of the golden-section search for minimax `ω`.
pub const OMEGA_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuseMode {
    Wep,
    Exact,
}

/// Monte Carlo settings shared by the mixture commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub samples: usize,
    /// Proposal variance; `None` picks `(width / 4)^2` of the domain.
    pub alpha: Option<f64>,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { samples: 2000, alpha: None, seed: DEFAULT_SEED, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseRequest {
    pub p_i: PathBuf,
    pub p_j: PathBuf,
    pub common: Option<PathBuf>,
    pub mode: FuseMode,
    pub omega: Option<f64>,
    /// Oracle cells per axis.
    pub grid: usize,
    pub mc: McSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionStats {
    pub mode: FuseMode,
    pub omega: Option<f64>,
    pub samples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub components: usize,
    pub pruned: usize,
    pub discarded_fraction: f64,
    pub low_ess: usize,
    pub tail_blowup: usize,
    /// Set when the result was returned without sampling.
    pub shortcut: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KldReport {
    #[serde(flatten)]
    pub stats: FusionStats,
    pub grid: usize,
    pub bounds: Vec<[f64; 2]>,
    /// `KL(grid oracle || GM approximation)` in nats.
    pub kld: f64,
}

struct Inputs {
    p_i: GaussianMixture,
    p_j: GaussianMixture,
    p_c: Option<GaussianMixture>,
}

fn load_inputs(req: &FuseRequest) -> Result<Inputs> {
    if let Some(w) = req.omega {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Usage(format!("--omega {w} outside [0, 1]")));
        }
    }
    if req.grid < 2 {
        return Err(Error::Usage("--grid needs at least 2 cells per axis".into()));
    }
    let load = |p: &Path| read_pdf(p).and_then(|pdf| pdf.into_mixture().map_err(|e| e.in_file(p)));
    let p_i = load(&req.p_i)?;
    let p_j = load(&req.p_j)?;
    let p_c = match (req.mode, &req.common) {
        (FuseMode::Exact, Some(c)) => Some(load(c)?),
        (FuseMode::Exact, None) => return Err(Error::Usage("exact mode needs --common".into())),
        (FuseMode::Wep, Some(_)) => return Err(Error::Usage("--common only applies to exact mode".into())),
        (FuseMode::Wep, None) => None,
    };
    for m in [Some(&p_j), p_c.as_ref()].into_iter().flatten() {
        if m.dim() != p_i.dim() {
            return Err(Error::Usage(format!("inputs have dimensions {} and {}", p_i.dim(), m.dim())));
        }
    }
    Ok(Inputs { p_i, p_j, p_c })
}

/// Axis-aligned box covering every component to six standard deviations.
pub fn covering_bounds(mixtures: &[&GaussianMixture]) -> Vec<(f64, f64)> {
    let d = mixtures[0].dim();
    (0..d)
        .map(|k| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for c in mixtures.iter().flat_map(|m| m.components()) {
                let (mu, sd) = (c.gaussian.mean()[k], c.gaussian.cov()[(k, k)].sqrt());
                lo = lo.min(mu - 6.0 * sd);
                hi = hi.max(mu + 6.0 * sd);
            }
            (lo, hi)
        })
        .collect()
}

pub fn raster(grid: &Grid, d: &(impl LogDensity + ?Sized)) -> Result<GridPdf> {
    Ok(GridPdf::from_log_density(grid.clone(), |x| d.log_density(x))?)
}

fn params_for(mc: &McSettings, bounds: &[(f64, f64)]) -> Result<FusionParams> {
    let width = bounds.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    let base = match mc.alpha {
        Some(a) => FusionParams::new(a),
        None => FusionParams::for_domain_width(width),
    };
    let params = FusionParams { n_samples: mc.samples, seed: mc.seed, execution: mc.execution, ..base };
    params.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(params)
}

struct Fused {
    mixture: GaussianMixture,
    stats: FusionStats,
    /// `None` when no sampling was needed.
    fusion: Option<MixtureFusion>,
}

fn stats(mode: FuseMode, omega: Option<f64>, params: &FusionParams, f: Option<&MixtureFusion>) -> FusionStats {
    FusionStats {
        mode,
        omega,
        samples: params.n_samples,
        alpha: params.alpha,
        seed: params.seed,
        components: f.map_or(0, |f| f.mixture.len()),
        pruned: f.map_or(0, |f| f.pruned),
        discarded_fraction: f.map_or(0.0, |f| f.discarded_fraction),
        low_ess: f.map_or(0, |f| f.low_ess_count()),
        tail_blowup: f.map_or(0, |f| f.tail_blowup_count()),
        shortcut: None,
    }
}

/// Runs the GM fusion. In exact mode a side identical to the common pdf
/// carries no new information and the other side is returned unchanged.
fn fuse(inputs: &Inputs, mode: FuseMode, omega: Option<f64>, params: &FusionParams, grid: &Grid) -> Result<Fused> {
    match (mode, &inputs.p_c) {
        (FuseMode::Exact, Some(p_c)) => {
            let copy = if inputs.p_j == *p_c {
                Some(&inputs.p_i)
            } else if inputs.p_i == *p_c {
                Some(&inputs.p_j)
            } else {
                None
            };
            if let Some(m) = copy {
                let mut s = stats(mode, None, params, None);
                s.components = m.len();
                s.shortcut = Some("no_new_information".into());
                return Ok(Fused { mixture: m.clone(), stats: s, fusion: None });
            }
            let f = gm_exact_fuse(&inputs.p_i, &inputs.p_j, p_c, params)?;
            Ok(Fused { stats: stats(mode, None, params, Some(&f)), mixture: f.mixture.clone(), fusion: Some(f) })
        }
        _ => {
            let w = match omega {
                Some(w) => w,
                None => {
                    let cost = OmegaCost::minimax(OMEGA_TOL)?;
                    optimize_omega(&raster(grid, &inputs.p_i)?, &raster(grid, &inputs.p_j)?, &cost)?
                }
            };
            let f = gm_wep_fuse(&inputs.p_i, &inputs.p_j, w, params)?;
            Ok(Fused { stats: stats(mode, Some(w), params, Some(&f)), mixture: f.mixture.clone(), fusion: Some(f) })
        }
    }
}

fn domain(inputs: &Inputs, cells: usize) -> Result<Grid> {
    let mut all = vec![&inputs.p_i, &inputs.p_j];
    all.extend(inputs.p_c.as_ref());
    let bounds = covering_bounds(&all);
    let d = bounds.len();
    if d > ddf_core::pdf::MAX_GRID_DIMS {
        return Err(Error::Usage(format!("grid oracles support at most {} dimensions, inputs have {d}", ddf_core::pdf::MAX_GRID_DIMS)));
    }
    Ok(Grid::new(bounds, vec![cells; d])?)
}

/// Grid oracle plus GM approximation; writes rasters, `gm_fused.json` and
/// `kld.json`.
pub fn fuse_demo(req: &FuseRequest, out: &Path) -> Result<KldReport> {
    let inputs = load_inputs(req)?;
    let grid = domain(&inputs, req.grid)?;
    let params = params_for(&req.mc, grid.bounds())?;
    let fused = fuse(&inputs, req.mode, req.omega, &params, &grid)?;

    let ri = raster(&grid, &inputs.p_i)?;
    let rj = raster(&grid, &inputs.p_j)?;
    let oracle = match (req.mode, &inputs.p_c) {
        (FuseMode::Exact, Some(p_c)) => GridPdf::from_log_density(grid.clone(), |x| {
            inputs.p_i.log_pdf(x) + inputs.p_j.log_pdf(x) - p_c.log_pdf(x)
        })?,
        _ => {
            let w = fused.stats.omega.expect("wep fusion records omega");
            ddf_core::fusion::wep_fuse(&ri, &rj, w)?
        }
    };
    let approx = raster(&grid, &fused.mixture)?;
    let kld = grid_kld(&oracle, &approx)?;

    create_dir(out)?;
    write_grid_csv_file(&out.join("p_i.csv"), &ri)?;
    write_grid_csv_file(&out.join("p_j.csv"), &rj)?;
    if let Some(p_c) = &inputs.p_c {
        write_grid_csv_file(&out.join("p_c.csv"), &raster(&grid, p_c)?)?;
    }
    write_grid_csv_file(&out.join("oracle.csv"), &oracle)?;
    write_grid_csv_file(&out.join("gm_fused.csv"), &approx)?;
    write_pdf(&out.join("gm_fused.json"), &Pdf::Mixture(fused.mixture))?;
    let report = KldReport {
        stats: fused.stats,
        grid: req.grid,
        bounds: grid.bounds().iter().map(|&(lo, hi)| [lo, hi]).collect(),
        kld,
    };
    write_json(&out.join("kld.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiagnostics {
    pub q: usize,
    pub r: usize,
    pub log_weight: f64,
    pub effective_sample_size: f64,
    pub low_ess: bool,
    pub tail_blowup: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmFuseReport {
    #[serde(flatten)]
    pub stats: FusionStats,
    pub per_component: Vec<ComponentDiagnostics>,
}

/// GM fusion only; writes `fused.json` and `diagnostics.json`.
pub fn gm_fuse(req: &FuseRequest, out: &Path) -> Result<GmFuseReport> {
    let inputs = load_inputs(req)?;
    let grid = domain(&inputs, req.grid)?;
    let params = params_for(&req.mc, grid.bounds())?;
    let fused = fuse(&inputs, req.mode, req.omega, &params, &grid)?;
    let report = GmFuseReport { per_component: fused.fusion.as_ref().map(diagnostics).unwrap_or_default(), stats: fused.stats };
    let mixture = fused.mixture;
    create_dir(out)?;
    write_pdf(&out.join("fused.json"), &Pdf::Mixture(mixture))?;
    write_json(&out.join("diagnostics.json"), &report)?;
    Ok(report)
}

fn diagnostics(f: &MixtureFusion) -> Vec<ComponentDiagnostics> {
    f.components
        .iter()
        .map(|c| ComponentDiagnostics {
            q: c.q,
            r: c.r,
            log_weight: c.log_weight,
            effective_sample_size: c.diagnostics.effective_sample_size,
            low_ess: c.diagnostics.low_ess,
            tail_blowup: c.diagnostics.tail_blowup,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRequest {
    pub scenario: PathBuf,
    pub seed: Option<u64>,
    /// Overrides the scenario's cells per axis.
    pub grid: Option<usize>,
    pub execution: Execution,
}

fn load_scenario(path: &Path, seed: Option<u64>, grid: Option<usize>) -> Result<Scenario> {
    let mut s = read_scenario(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(g) = grid {
        s.cells_per_axis = g;
        s.validate().map_err(|e| Error::Usage(format!("--grid {g}: {e}")))?;
    }
    Ok(s)
}

/// Runs a scenario and writes its report directory.
pub fn search_sim(req: &SimRequest, out: &Path) -> Result<RunSummary> {
    let scenario = load_scenario(&req.scenario, req.seed, req.grid)?;
    let options = RunOptions { execution: req.execution, ..RunOptions::default() };
    let report = Simulation::new(scenario.clone(), options)?.run_to_end()?;
    write_run_report(out, &scenario, &report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRequest {
    pub scenario: PathBuf,
    pub points: usize,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub execution: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepLoss {
    pub omega_r: f64,
    pub kld_total: f64,
    pub kld_region_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// Agents `(i, j)` whose beliefs are fused.
    pub agents: [usize; 2],
    pub step: usize,
    pub conditional_omegas: Vec<f64>,
    /// Factorized WEP with every weight, `ω_R` included, chosen by minimax.
    pub minimax: SweepLoss,
    pub best_factorized: Option<SweepLoss>,
    pub best_whole_joint: Option<SweepLoss>,
    pub factorized_not_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub curve: String,
    pub omega_r: f64,
    pub kld_total: f64,
    pub kld_region_term: f64,
}

/// Losses of factorized WEP (conditional weights fixed at their minimax
/// values, `ω_R` swept) and whole-joint WEP against exact fusion at the
/// scenario's first exchange; writes `omega_sweep.csv` and
/// `omega_sweep.json`.
pub fn omega_sweep(req: &SweepRequest, out: &Path) -> Result<SweepSummary> {
    if req.points < 2 {
        return Err(Error::Usage("--points needs at least 2 grid points".into()));
    }
    let mut scenario = load_scenario(&req.scenario, req.seed, req.grid)?;
    if scenario.n_agents() < 2 {
        return Err(Error::Usage("the sweep needs at least two agents".into()));
    }
    let (a, b, step) = scenario.exchanges.iter().min_by_key(|e| e.step).map_or((0, 1, scenario.steps), |e| (e.a, e.b, e.step));
    let (i, j) = (a.min(b), a.max(b));
    scenario.exchanges.clear();
    scenario.steps = step;
    let options = RunOptions { execution: req.execution, track_oracle: false, snapshots: false, ..RunOptions::default() };
    let mut sim = Simulation::new(scenario, options)?;
    while !sim.is_finished() {
        sim.step()?;
    }
    let (b_i, b_j, prior) = (sim.belief(i), sim.belief(j), sim.prior());

    let cost = OmegaCost::minimax(OMEGA_TOL)?;
    let minimax = OmegaAssignment::minimax(b_i, b_j, Some(prior), &cost)?;
    let grid: Vec<f64> = (0..req.points).map(|k| k as f64 / (req.points - 1) as f64).collect();
    let sweep = omega_r_sweep(b_i, b_j, prior, &minimax.conditional, &grid)?;
    let mm = hybrid_wep_fuse(b_i, b_j, &minimax, &FactorSelector::all(b_i.n_regions()))?.belief;
    let mm_kld = hybrid_joint_kld(&sweep.exact, &mm)?;

    let loss = |p: ddf_core::hybrid::SweepPoint| SweepLoss {
        omega_r: p.omega_region,
        kld_total: p.kld_total,
        kld_region_term: p.kld_region_term,
    };
    let best_factorized = sweep.best_factorized().map(loss);
    let best_whole_joint = sweep.best_whole_joint().map(loss);
    let summary = SweepSummary {
        agents: [i, j],
        step,
        conditional_omegas: minimax.conditional.clone(),
        minimax: SweepLoss { omega_r: minimax.region, kld_total: mm_kld.total, kld_region_term: mm_kld.region_term },
        factorized_not_worse: match (best_factorized, best_whole_joint) {
            (Some(f), Some(w)) => f.kld_total <= w.kld_total,
            _ => false,
        },
        best_factorized,
        best_whole_joint,
    };

    create_dir(out)?;
    let csv_path = out.join("omega_sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for (curve, points) in [("factorized", &sweep.factorized), ("whole_joint", &sweep.whole_joint)] {
        for p in points {
            w.serialize(SweepCsvRow {
                curve: curve.into(),
                omega_r: p.omega_region,
                kld_total: p.kld_total,
                kld_region_term: p.kld_region_term,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    write_json(&out.join("omega_sweep.json"), &summary)?;
    Ok(summary)
}
