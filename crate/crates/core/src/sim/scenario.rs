use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;

use petgraph::unionfind::UnionFind;

use super::geometry::{Point, Polygon};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::hybrid::HybridBelief;
use crate::pdf::{DiscreteDist, Gaussian, GaussianMixture, Grid, GridPdf};
use crate::sensor::SensorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Links form a forest; exact (channel-filter) fusion is allowed.
    Tree,
    /// Arbitrary, possibly loopy links; only WEP fusion is allowed.
    AdHoc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionMode {
    Exact,
    /// Per-factor minimax-KLD weights chosen at every exchange.
    WepMinimax,
    WepFixed(f64),
}

impl FusionMode {
    pub fn is_exact(self) -> bool {
        matches!(self, FusionMode::Exact)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub trajectory: Trajectory,
    pub sensor: SensorModel,
}

/// A symmetric exchange between agents `a` and `b` after the local updates
/// of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeSpec {
    pub step: usize,
    pub a: usize,
    pub b: usize,
}

/// Static description of a search run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// `((x_min, x_max), (y_min, y_max))`.
    pub bounds: ((f64, f64), (f64, f64)),
    pub obstacles: Vec<Polygon>,
    /// Mutually exclusive regions covering the free space.
    pub regions: Vec<Polygon>,
    pub region_prior: Vec<f64>,
    /// Each region's prior conditional is a grid rasterization of an
    /// `n x n` lattice of broad Gaussians over its bounding box.
    pub prior_components_per_axis: usize,
    /// Grid cells per axis of each region's bounding box.
    pub cells_per_axis: usize,
    pub agents: Vec<AgentSpec>,
    pub topology: Topology,
    pub links: Vec<(usize, usize)>,
    pub exchanges: Vec<ExchangeSpec>,
    pub mode: FusionMode,
    pub steps: usize,
    pub seed: u64,
    /// Ground-truth target location; `None` means every reading is a miss.
    pub target: Option<Point>,
}

impl Scenario {
    /// Two robots spiralling counterclockwise inward over a 3 x 2 block of
    /// 10 m regions (top row 1-3, bottom row 4-6), exchanging once at the
    /// final step. Robot 1 circles the corner shared by regions 1, 2, 4, 5
    /// and robot 2 the corner shared by 2, 3, 5, 6, so regions 1 and 4 are
    /// seen only by robot 1, regions 3 and 6 only by robot 2, and regions 2
    /// and 5 by both.
    pub fn search_reproduction() -> Self {
        let rect = |x: (f64, f64), y: (f64, f64)| Polygon::rectangle(x, y).expect("static rectangle");
        let sensor = SensorModel { range: 2.5, p_max: 0.7, falloff: 1.0 };
        let spiral = |center: Point, start_angle: f64| Trajectory::Spiral {
            center,
            start_radius: 7.0,
            end_radius: 1.5,
            start_angle,
            turns: 1.0,
            duration: 600,
        };
        Self {
            bounds: ((0.0, 30.0), (0.0, 20.0)),
            obstacles: alloc::vec![rect((1.0, 4.0), (16.0, 19.0)), rect((26.0, 29.0), (1.0, 4.0))],
            regions: alloc::vec![
                rect((0.0, 10.0), (10.0, 20.0)),
                rect((10.0, 20.0), (10.0, 20.0)),
                rect((20.0, 30.0), (10.0, 20.0)),
                rect((0.0, 10.0), (0.0, 10.0)),
                rect((10.0, 20.0), (0.0, 10.0)),
                rect((20.0, 30.0), (0.0, 10.0)),
            ],
            region_prior: alloc::vec![0.1190, 0.1190, 0.2415, 0.1497, 0.1735, 0.1973],
            prior_components_per_axis: 2,
            cells_per_axis: 100,
            agents: alloc::vec![
                AgentSpec { trajectory: spiral([10.0, 10.0], -FRAC_PI_4), sensor },
                AgentSpec { trajectory: spiral([20.0, 10.0], FRAC_PI_4), sensor },
            ],
            topology: Topology::Tree,
            links: alloc::vec![(0, 1)],
            exchanges: alloc::vec![ExchangeSpec { step: 600, a: 0, b: 1 }],
            mode: FusionMode::Exact,
            steps: 600,
            seed: crate::mixture::DEFAULT_SEED,
            target: None,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ((x0, x1), (y0, y1)) = self.bounds;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::InvalidParameter(alloc::format!("empty world bounds {:?}", self.bounds)));
        }
        if self.regions.is_empty() || self.regions.len() != self.region_prior.len() {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} regions with {} prior probabilities",
                self.regions.len(),
                self.region_prior.len()
            )));
        }
        DiscreteDist::new(self.region_prior.clone())?;
        if self.cells_per_axis < 2 || self.prior_components_per_axis == 0 {
            return Err(Error::InvalidParameter("need >= 2 cells and >= 1 prior component per axis".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::InvalidParameter("scenario has no agents".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("scenario has no steps".into()));
        }
        for a in &self.agents {
            a.trajectory.validate()?;
            a.sensor.validate()?;
        }
        if let FusionMode::WepFixed(w) = self.mode {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidParameter(alloc::format!("omega {w} outside [0, 1]")));
            }
        }
        if let Some(t) = self.target {
            if !(t[0] >= x0 && t[0] <= x1 && t[1] >= y0 && t[1] <= y1) {
                return Err(Error::InvalidParameter(alloc::format!("target {t:?} outside the world")));
            }
        }
        let n = self.n_agents();
        for &(a, b) in &self.links {
            if a >= n || b >= n || a == b {
                return Err(Error::Configuration(alloc::format!("invalid link ({a}, {b}) for {n} agents")));
            }
        }
        if self.topology == Topology::Tree {
            let mut uf = UnionFind::<usize>::new(n);
            for &(a, b) in &self.links {
                if !uf.union(a, b) {
                    return Err(Error::Configuration(alloc::format!(
                        "link ({a}, {b}) closes a cycle in a tree topology"
                    )));
                }
            }
        }
        if self.mode.is_exact() && self.topology != Topology::Tree {
            return Err(Error::Configuration(
                "exact fusion needs a tree topology; use a WEP mode on ad-hoc networks".into(),
            ));
        }
        for e in &self.exchanges {
            self.check_exchange(e)?;
        }
        Ok(())
    }

    pub fn has_link(&self, a: usize, b: usize) -> bool {
        self.links.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    pub fn check_exchange(&self, e: &ExchangeSpec) -> Result<()> {
        if e.step == 0 || e.step > self.steps {
            return Err(Error::Configuration(alloc::format!(
                "exchange at step {} outside 1..={}",
                e.step,
                self.steps
            )));
        }
        if !self.has_link(e.a, e.b) {
            return Err(Error::Configuration(alloc::format!("agents {} and {} are not linked", e.a, e.b)));
        }
        Ok(())
    }

    fn in_free_space(&self, p: Point) -> bool {
        let ((x0, x1), (y0, y1)) = self.bounds;
        p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1 && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Region containing `p`, if `p` is in free space.
    pub fn region_of(&self, p: Point) -> Option<usize> {
        if !self.in_free_space(p) {
            return None;
        }
        self.regions.iter().position(|r| r.contains(p))
    }

    /// Shared prior `p_0(x, R)`: each conditional lives on its region's
    /// bounding-box grid with zero mass outside the region and on obstacles.
    pub fn prior_belief(&self) -> Result<HybridBelief> {
        self.validate()?;
        let mut conditionals = Vec::with_capacity(self.regions.len());
        for (r, region) in self.regions.iter().enumerate() {
            let (bx, by) = region.bounding_box();
            let bx = (bx.0.max(self.bounds.0 .0), bx.1.min(self.bounds.0 .1));
            let by = (by.0.max(self.bounds.1 .0), by.1.min(self.bounds.1 .1));
            if !(bx.0 < bx.1 && by.0 < by.1) {
                return Err(Error::InvalidParameter(alloc::format!("region {r} lies outside the world")));
            }
            let grid = Grid::new(alloc::vec![bx, by], alloc::vec![self.cells_per_axis; 2])?;
            let gm = pseudo_uniform_mixture(bx, by, self.prior_components_per_axis)?;
            let mut overlap = None;
            let pdf = GridPdf::from_log_density(grid, |x| {
                let p = [x[0], x[1]];
                if !region.contains(p) || !self.in_free_space(p) {
                    return f64::NEG_INFINITY;
                }
                if overlap.is_none() {
                    if let Some(o) = self.regions.iter().enumerate().position(|(k, q)| k != r && q.contains(p)) {
                        overlap = Some(o);
                    }
                }
                gm.log_pdf(x)
            })
            .map_err(|e| match e {
                Error::DegenerateDensity => {
                    Error::InvalidParameter(alloc::format!("region {r} has no free cells at this resolution"))
                }
                other => other,
            })?;
            if let Some(o) = overlap {
                return Err(Error::InvalidParameter(alloc::format!("regions {r} and {o} overlap")));
            }
            conditionals.push(pdf);
        }
        HybridBelief::new(DiscreteDist::new(self.region_prior.clone())?, conditionals)
    }
}

fn pseudo_uniform_mixture(bx: (f64, f64), by: (f64, f64), n: usize) -> Result<GaussianMixture> {
    let (wx, wy) = ((bx.1 - bx.0) / n as f64, (by.1 - by.0) / n as f64);
    let mut components = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mean = [bx.0 + (i as f64 + 0.5) * wx, by.0 + (j as f64 + 0.5) * wy];
            let g = Gaussian::from_slices(&mean, &[wx * wx, 0.0, 0.0, wy * wy])?;
            components.push((1.0 / (n * n) as f64, g));
        }
    }
    GaussianMixture::from_unnormalized(components)
}
