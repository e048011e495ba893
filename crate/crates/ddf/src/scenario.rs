//! Scenario files (JSON).

use std::fs;
use std::path::Path;

use ddf_core::sensor::SensorModel;
use ddf_core::sim::{AgentSpec, ExchangeSpec, FusionMode, Point, Polygon, Scenario, Topology, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub bounds: BoundsDoc,
    #[serde(default)]
    pub obstacles: Vec<Vec<Point>>,
    pub regions: Vec<Vec<Point>>,
    pub region_prior: Vec<f64>,
    pub prior_components_per_axis: usize,
    pub cells_per_axis: usize,
    pub agents: Vec<AgentDoc>,
    pub topology: TopologyDoc,
    #[serde(default)]
    pub links: Vec<[usize; 2]>,
    #[serde(default)]
    pub exchanges: Vec<ExchangeDoc>,
    pub mode: ModeDoc,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub target: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsDoc {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub trajectory: TrajectoryDoc,
    pub sensor: SensorDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryDoc {
    Spiral { center: Point, start_radius: f64, end_radius: f64, start_angle: f64, turns: f64, duration: usize },
    Waypoints { points: Vec<Point> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorDoc {
    pub range: f64,
    pub p_max: f64,
    pub falloff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyDoc {
    Tree,
    AdHoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeDoc {
    pub step: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeDoc {
    Exact,
    WepMinimax,
    WepFixed { omega: f64 },
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        let poly = |p: &Polygon| p.vertices().to_vec();
        Self {
            bounds: BoundsDoc { x: [s.bounds.0 .0, s.bounds.0 .1], y: [s.bounds.1 .0, s.bounds.1 .1] },
            obstacles: s.obstacles.iter().map(poly).collect(),
            regions: s.regions.iter().map(poly).collect(),
            region_prior: s.region_prior.clone(),
            prior_components_per_axis: s.prior_components_per_axis,
            cells_per_axis: s.cells_per_axis,
            agents: s
                .agents
                .iter()
                .map(|a| AgentDoc {
                    trajectory: match &a.trajectory {
                        Trajectory::Spiral { center, start_radius, end_radius, start_angle, turns, duration } => {
                            TrajectoryDoc::Spiral {
                                center: *center,
                                start_radius: *start_radius,
                                end_radius: *end_radius,
                                start_angle: *start_angle,
                                turns: *turns,
                                duration: *duration,
                            }
                        }
                        Trajectory::Waypoints(points) => TrajectoryDoc::Waypoints { points: points.clone() },
                    },
                    sensor: SensorDoc { range: a.sensor.range, p_max: a.sensor.p_max, falloff: a.sensor.falloff },
                })
                .collect(),
            topology: match s.topology {
                Topology::Tree => TopologyDoc::Tree,
                Topology::AdHoc => TopologyDoc::AdHoc,
            },
            links: s.links.iter().map(|&(a, b)| [a, b]).collect(),
            exchanges: s.exchanges.iter().map(|e| ExchangeDoc { step: e.step, a: e.a, b: e.b }).collect(),
            mode: match s.mode {
                FusionMode::Exact => ModeDoc::Exact,
                FusionMode::WepMinimax => ModeDoc::WepMinimax,
                FusionMode::WepFixed(omega) => ModeDoc::WepFixed { omega },
            },
            steps: s.steps,
            seed: s.seed,
            target: s.target,
        }
    }
}

impl ScenarioDoc {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let polygons = |field: &str, list: &[Vec<Point>]| -> Result<Vec<Polygon>> {
            list.iter()
                .enumerate()
                .map(|(k, v)| Polygon::new(v.clone()).map_err(|e| Error::field(&format!("{field}[{k}]"), e.to_string())))
                .collect()
        };
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let s = a.sensor;
                let sensor = SensorModel::new(s.range, s.p_max, s.falloff)
                    .map_err(|e| Error::field(&format!("agents[{k}].sensor"), e.to_string()))?;
                let trajectory = match &a.trajectory {
                    TrajectoryDoc::Spiral { center, start_radius, end_radius, start_angle, turns, duration } => {
                        Trajectory::Spiral {
                            center: *center,
                            start_radius: *start_radius,
                            end_radius: *end_radius,
                            start_angle: *start_angle,
                            turns: *turns,
                            duration: *duration,
                        }
                    }
                    TrajectoryDoc::Waypoints { points } => Trajectory::Waypoints(points.clone()),
                };
                Ok(AgentSpec { trajectory, sensor })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            bounds: ((self.bounds.x[0], self.bounds.x[1]), (self.bounds.y[0], self.bounds.y[1])),
            obstacles: polygons("obstacles", &self.obstacles)?,
            regions: polygons("regions", &self.regions)?,
            region_prior: self.region_prior.clone(),
            prior_components_per_axis: self.prior_components_per_axis,
            cells_per_axis: self.cells_per_axis,
            agents,
            topology: match self.topology {
                TopologyDoc::Tree => Topology::Tree,
                TopologyDoc::AdHoc => Topology::AdHoc,
            },
            links: self.links.iter().map(|l| (l[0], l[1])).collect(),
            exchanges: self.exchanges.iter().map(|e| ExchangeSpec { step: e.step, a: e.a, b: e.b }).collect(),
            mode: match self.mode {
                ModeDoc::Exact => FusionMode::Exact,
                ModeDoc::WepMinimax => FusionMode::WepMinimax,
                ModeDoc::WepFixed { omega } => FusionMode::WepFixed(omega),
            },
            steps: self.steps,
            seed: self.seed,
            target: self.target,
        };
        scenario.validate().map_err(|e| Error::field("scenario", e.to_string()))?;
        Ok(scenario)
    }
}

pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::field(&e.path().to_string(), e.into_inner().to_string()))?;
    doc.to_scenario()
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let mut text = serde_json::to_string_pretty(&ScenarioDoc::from(s)).expect("scenario documents always serialize");
    text.push('\n');
    text
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scenario_from_json(&text).map_err(|e| e.in_file(path))
}

pub fn write_scenario(path: &Path, s: &Scenario) -> Result<()> {
    fs::write(path, scenario_to_json(s)).map_err(|e| Error::io(path, e))
}
