use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::Point;
use super::scenario::{ExchangeSpec, FusionMode, Scenario};
use crate::error::{Error, Result};
use crate::fusion::{ChannelState, LinkId, OmegaCost};
use crate::hybrid::{
    hybrid_exact_fuse, hybrid_joint_kld, hybrid_local_update, hybrid_wep_fuse, FactorSelector, HybridBelief,
    OmegaAssignment,
};
use crate::mixture::Execution;
use crate::pdf::DiscreteDist;
use crate::sensor::Detection;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub execution: Execution,
    /// Record metrics every `metrics_interval` steps (0: only at exchanges
    /// and the final step).
    pub metrics_interval: usize,
    /// Track a centralized oracle per agent over its information set.
    pub track_oracle: bool,
    /// Keep participant beliefs before and after every exchange.
    pub snapshots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { execution: Execution::default(), metrics_interval: 10, track_oracle: true, snapshots: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRecord {
    pub step: usize,
    pub agent: usize,
    pub pose: Point,
    pub outcome: Detection,
}

/// One direction of an exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMessage {
    pub step: usize,
    pub sender: usize,
    pub receiver: usize,
    pub selector: FactorSelector,
    /// Conditionals listed in `selector`, in region order.
    pub conditionals: Vec<crate::pdf::GridPdf>,
    pub region_weights: Option<DiscreteDist>,
    pub omegas: Option<OmegaAssignment>,
}

impl FactorMessage {
    /// Grid cells plus region weights carried.
    pub fn payload_cells(&self) -> usize {
        self.conditionals.iter().map(|c| c.len()).sum::<usize>()
            + self.region_weights.as_ref().map_or(0, DiscreteDist::len)
    }

    /// Rebuilds the sender's belief on top of what the receiver already
    /// knows the sender holds.
    fn reconstruct(&self, base: &HybridBelief) -> Result<HybridBelief> {
        let (regions, mut conditionals) = base.clone().into_parts();
        for (&r, c) in self.selector.regions().iter().zip(&self.conditionals) {
            conditionals[r] = c.clone();
        }
        HybridBelief::new(self.region_weights.clone().unwrap_or(regions), conditionals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageRecord {
    pub step: usize,
    pub sender: usize,
    pub receiver: usize,
    pub regions: Vec<usize>,
    pub region_weights: bool,
    pub payload_cells: usize,
    /// Size of the same message if the full joint were sent.
    pub whole_joint_cells: usize,
    pub omegas: Option<OmegaAssignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub step: usize,
    pub agent: usize,
    pub kld_to_oracle: Option<f64>,
    pub entropy: f64,
    pub message_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPhase {
    BeforeExchange,
    AfterExchange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub agent: usize,
    pub phase: SnapshotPhase,
    pub belief: HybridBelief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub prior: HybridBelief,
    pub metrics: Vec<MetricRow>,
    pub observations: Vec<ObservationRecord>,
    pub messages: Vec<MessageRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_beliefs: Vec<HybridBelief>,
    pub final_oracles: Option<Vec<HybridBelief>>,
}

impl RunReport {
    pub fn payload_cells(&self) -> usize {
        self.messages.iter().map(|m| m.payload_cells).sum()
    }

    pub fn whole_joint_cells(&self) -> usize {
        self.messages.iter().map(|m| m.whole_joint_cells).sum()
    }
}

#[derive(Debug, Clone)]
struct AgentState {
    belief: HybridBelief,
    channels: BTreeMap<usize, ChannelState<HybridBelief>>,
    oracle: Option<HybridBelief>,
    known: BTreeSet<usize>,
    rng: ChaCha8Rng,
    sent_cells: usize,
}

/// Step-by-step search simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    options: RunOptions,
    prior: HybridBelief,
    step: usize,
    agents: Vec<AgentState>,
    pending: VecDeque<ExchangeSpec>,
    observations: Vec<ObservationRecord>,
    messages: Vec<MessageRecord>,
    metrics: Vec<MetricRow>,
    snapshots: Vec<Snapshot>,
}

impl Simulation {
    pub fn new(scenario: Scenario, options: RunOptions) -> Result<Self> {
        let prior = scenario.prior_belief()?;
        let agents = (0..scenario.n_agents())
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                rng.set_stream(id as u64);
                let channels = if scenario.mode.is_exact() {
                    scenario
                        .links
                        .iter()
                        .filter_map(|&(a, b)| LinkId::new(a, b).other(id))
                        .map(|n| (n, ChannelState::new(LinkId::new(id, n), prior.clone())))
                        .collect()
                } else {
                    BTreeMap::new()
                };
                AgentState {
                    belief: prior.clone(),
                    channels,
                    oracle: options.track_oracle.then(|| prior.clone()),
                    known: BTreeSet::new(),
                    rng,
                    sent_cells: 0,
                }
            })
            .collect();
        let mut pending: Vec<ExchangeSpec> = scenario.exchanges.clone();
        pending.sort_by_key(|e| e.step);
        Ok(Self {
            scenario,
            options,
            prior,
            step: 0,
            agents,
            pending: pending.into(),
            observations: Vec::new(),
            messages: Vec::new(),
            metrics: Vec::new(),
            snapshots: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn prior(&self) -> &HybridBelief {
        &self.prior
    }

    /// Last completed step (0 before the first).
    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.scenario.steps
    }

    pub fn belief(&self, agent: usize) -> &HybridBelief {
        &self.agents[agent].belief
    }

    pub fn oracle(&self, agent: usize) -> Option<&HybridBelief> {
        self.agents[agent].oracle.as_ref()
    }

    pub fn observations(&self) -> &[ObservationRecord] {
        &self.observations
    }

    /// Queues a symmetric exchange after the local updates of `step`.
    /// Exchanges at the same step run in the order they were queued.
    pub fn schedule_exchange(&mut self, a: usize, b: usize, step: usize) -> Result<()> {
        let e = ExchangeSpec { step, a, b };
        self.scenario.check_exchange(&e)?;
        if step <= self.step {
            return Err(Error::Configuration(alloc::format!("step {step} has already run")));
        }
        let at = self.pending.iter().position(|p| p.step > step).unwrap_or(self.pending.len());
        self.pending.insert(at, e);
        Ok(())
    }

    /// Factors of `agent`'s belief that differ from what it shares with
    /// `neighbor`.
    pub fn new_information_selector(&self, agent: usize, neighbor: usize) -> Result<FactorSelector> {
        let channel = self.agents[agent].channels.get(&neighbor).ok_or_else(|| {
            Error::Configuration(alloc::format!("agent {agent} keeps no channel to {neighbor}"))
        })?;
        let belief = &self.agents[agent].belief;
        Ok(FactorSelector::new(
            belief.changed_regions(channel.common()),
            belief.region_weights_changed(channel.common()),
        ))
    }

    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::Configuration(alloc::format!("all {} steps already ran", self.scenario.steps)));
        }
        let k = self.step + 1;
        let first_id = self.observations.len();
        for (id, agent) in self.agents.iter_mut().enumerate() {
            let spec = &self.scenario.agents[id];
            let pose = spec.trajectory.pose(k);
            let u: f64 = agent.rng.random();
            let outcome = match self.scenario.target {
                Some(t) if u < spec.sensor.detection_probability(crate::sensor::dist_sq(&t, &pose)) => Detection::Detected,
                _ => Detection::NotDetected,
            };
            self.observations.push(ObservationRecord { step: k, agent: id, pose, outcome });
            agent.sent_cells = 0;
        }
        let records = &self.observations[first_id..];
        let scenario = &self.scenario;
        let update = |(id, agent): (usize, &mut AgentState)| -> Result<()> {
            let obs = &records[id];
            let sensor = &scenario.agents[id].sensor;
            agent.belief = hybrid_local_update(&agent.belief, obs.outcome, sensor, &obs.pose)?;
            if let Some(o) = &agent.oracle {
                agent.oracle = Some(hybrid_local_update(o, obs.outcome, sensor, &obs.pose)?);
            }
            agent.known.insert(first_id + id);
            Ok(())
        };
        run_agents(&mut self.agents, self.options.execution, update)?;

        let mut exchanged = false;
        while self.pending.front().is_some_and(|e| e.step == k) {
            let e = self.pending.pop_front().expect("checked front");
            self.exchange(e.a, e.b, k)?;
            exchanged = true;
        }
        self.step = k;
        let interval_due = self.options.metrics_interval > 0 && k.is_multiple_of(self.options.metrics_interval);
        if interval_due || exchanged || self.is_finished() {
            self.record_metrics(k);
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<RunReport> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.into_report())
    }

    pub fn into_report(self) -> RunReport {
        let final_oracles = self.options.track_oracle.then(|| {
            self.agents.iter().map(|a| a.oracle.clone().expect("oracle tracked")).collect()
        });
        RunReport {
            prior: self.prior,
            metrics: self.metrics,
            observations: self.observations,
            messages: self.messages,
            snapshots: self.snapshots,
            final_beliefs: self.agents.into_iter().map(|a| a.belief).collect(),
            final_oracles,
        }
    }

    fn record_metrics(&mut self, step: usize) {
        for (id, a) in self.agents.iter().enumerate() {
            let kld = a.oracle.as_ref().map(|o| hybrid_joint_kld(o, &a.belief).map_or(f64::INFINITY, |k| k.total));
            self.metrics.push(MetricRow {
                step,
                agent: id,
                kld_to_oracle: kld,
                entropy: a.belief.entropy(),
                message_cells: a.sent_cells,
            });
        }
    }

    fn snapshot(&mut self, step: usize, agents: [usize; 2], phase: SnapshotPhase) {
        if self.options.snapshots {
            for id in agents {
                self.snapshots.push(Snapshot { step, agent: id, phase, belief: self.agents[id].belief.clone() });
            }
        }
    }

    fn message(&self, sender: usize, receiver: usize, step: usize) -> Result<FactorMessage> {
        let belief = &self.agents[sender].belief;
        let selector = match self.scenario.mode {
            FusionMode::Exact => self.new_information_selector(sender, receiver)?,
            _ => FactorSelector::new(belief.changed_regions(&self.prior), true),
        };
        Ok(FactorMessage {
            step,
            sender,
            receiver,
            conditionals: selector.regions().iter().map(|&r| belief.conditional(r).clone()).collect(),
            region_weights: selector.include_region_weights.then(|| belief.regions().clone()),
            selector,
            omegas: None,
        })
    }

    fn exchange(&mut self, a: usize, b: usize, step: usize) -> Result<()> {
        self.snapshot(step, [a, b], SnapshotPhase::BeforeExchange);
        let mut msg_ab = self.message(a, b, step)?;
        let mut msg_ba = self.message(b, a, step)?;
        let n = self.prior.n_regions();
        let all = FactorSelector::all(n);

        let (fused_a, fused_b) = match self.scenario.mode {
            FusionMode::Exact => {
                let common_a = self.agents[a].channels[&b].common();
                let common_b = self.agents[b].channels[&a].common();
                let from_b = msg_ba.reconstruct(common_a)?;
                let from_a = msg_ab.reconstruct(common_b)?;
                let fa = hybrid_exact_fuse(&self.agents[a].belief, &from_b, common_a, &all)?.belief;
                let fb = hybrid_exact_fuse(&self.agents[b].belief, &from_a, common_b, &all)?.belief;
                (fa, fb)
            }
            mode => {
                let from_b = msg_ba.reconstruct(&self.prior)?;
                let from_a = msg_ab.reconstruct(&self.prior)?;
                // The lower id plays `i` on both ends so the pair agrees on ω.
                let (own_a, own_b) = (&self.agents[a].belief, &self.agents[b].belief);
                let (at_a, at_b) = if a < b { ((own_a, &from_b), (&from_a, own_b)) } else { ((&from_b, own_a), (own_b, &from_a)) };
                let omegas = match mode {
                    FusionMode::WepFixed(w) => OmegaAssignment::tied(w, n)?,
                    _ => OmegaAssignment::minimax(at_a.0, at_a.1, Some(&self.prior), &OmegaCost::default())?,
                };
                let fa = hybrid_wep_fuse(at_a.0, at_a.1, &omegas, &all)?.belief;
                let fb = hybrid_wep_fuse(at_b.0, at_b.1, &omegas, &all)?.belief;
                msg_ab.omegas = Some(omegas.clone());
                msg_ba.omegas = Some(omegas);
                (fa, fb)
            }
        };

        let whole = self.prior.total_cells() + n;
        for m in [&msg_ab, &msg_ba] {
            self.agents[m.sender].sent_cells += m.payload_cells();
            self.messages.push(MessageRecord {
                step,
                sender: m.sender,
                receiver: m.receiver,
                regions: m.selector.regions().to_vec(),
                region_weights: m.selector.include_region_weights,
                payload_cells: m.payload_cells(),
                whole_joint_cells: whole,
                omegas: m.omegas.clone(),
            });
        }

        if self.scenario.mode.is_exact() {
            for (me, other, fused) in [(a, b, &fused_a), (b, a, &fused_b)] {
                let ch = self.agents[me].channels.remove(&other).expect("exact mode keeps channels");
                self.agents[me].channels.insert(other, ch.update(fused.clone()));
            }
        }
        self.agents[a].belief = fused_a;
        self.agents[b].belief = fused_b;

        if self.options.track_oracle {
            let union: BTreeSet<usize> = self.agents[a].known.union(&self.agents[b].known).copied().collect();
            for id in [a, b] {
                let missing: Vec<usize> = union.difference(&self.agents[id].known).copied().collect();
                let mut oracle = self.agents[id].oracle.take().expect("oracle tracked");
                for o in missing {
                    let rec = &self.observations[o];
                    oracle =
                        hybrid_local_update(&oracle, rec.outcome, &self.scenario.agents[rec.agent].sensor, &rec.pose)?;
                }
                self.agents[id].oracle = Some(oracle);
                self.agents[id].known = union.clone();
            }
        } else {
            let union: BTreeSet<usize> = self.agents[a].known.union(&self.agents[b].known).copied().collect();
            self.agents[a].known = union.clone();
            self.agents[b].known = union;
        }
        self.snapshot(step, [a, b], SnapshotPhase::AfterExchange);
        Ok(())
    }
}

#[cfg(feature = "parallel")]
fn run_agents<F>(agents: &mut [AgentState], execution: Execution, f: F) -> Result<()>
where
    F: Fn((usize, &mut AgentState)) -> Result<()> + Sync + Send,
{
    use rayon::prelude::*;
    match execution {
        Execution::Parallel => agents.par_iter_mut().enumerate().try_for_each(f),
        Execution::Sequential => agents.iter_mut().enumerate().try_for_each(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_agents<F>(agents: &mut [AgentState], _execution: Execution, f: F) -> Result<()>
where
    F: Fn((usize, &mut AgentState)) -> Result<()>,
{
    agents.iter_mut().enumerate().try_for_each(f)
}

/// Runs a scenario to completion with default options.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    Simulation::new(scenario.clone(), RunOptions::default())?.run_to_end()
}

/// Replays logged observations (in log order) onto `start`.
pub fn replay<'a>(
    scenario: &Scenario,
    start: &HybridBelief,
    observations: impl IntoIterator<Item = &'a ObservationRecord>,
) -> Result<HybridBelief> {
    let mut b = start.clone();
    for rec in observations {
        let spec = scenario
            .agents
            .get(rec.agent)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("observation from unknown agent {}", rec.agent)))?;
        b = hybrid_local_update(&b, rec.outcome, &spec.sensor, &rec.pose)?;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::Topology;

    fn small() -> Scenario {
        let mut s = Scenario::search_reproduction();
        s.cells_per_axis = 20;
        s.steps = 60;
        s.exchanges = alloc::vec![ExchangeSpec { step: 60, a: 0, b: 1 }];
        for a in &mut s.agents {
            if let crate::sim::trajectory::Trajectory::Spiral { duration, .. } = &mut a.trajectory {
                *duration = 60;
            }
        }
        s
    }

    #[test]
    fn exact_exchange_matches_oracle() {
        let r = run(&small()).unwrap();
        let oracles = r.final_oracles.as_ref().unwrap();
        for (b, o) in r.final_beliefs.iter().zip(oracles) {
            assert!(hybrid_joint_kld(o, b).unwrap().total < 1e-9);
        }
        assert!(r.payload_cells() < r.whole_joint_cells());
        assert_eq!(r.messages.len(), 2);
    }

    #[test]
    fn selector_empty_after_exchange() {
        let mut sim = Simulation::new(small(), RunOptions::default()).unwrap();
        assert!(sim.new_information_selector(0, 1).unwrap().is_empty());
        for _ in 0..60 {
            sim.step().unwrap();
        }
        assert!(sim.new_information_selector(0, 1).unwrap().is_empty());
        assert!(sim.new_information_selector(1, 0).unwrap().is_empty());
    }

    #[test]
    fn no_links_means_local_only() {
        let mut s = small();
        s.exchanges.clear();
        let r = run(&s).unwrap();
        for (id, b) in r.final_beliefs.iter().enumerate() {
            let own = replay(&s, &r.prior, r.observations.iter().filter(|o| o.agent == id)).unwrap();
            assert_eq!(&own, b);
        }
    }

    #[test]
    fn schedule_rules() {
        let mut s = small();
        s.agents.push(s.agents[0].clone());
        s.links.push((1, 2));
        let mut sim = Simulation::new(s.clone(), RunOptions::default()).unwrap();
        assert!(matches!(sim.schedule_exchange(0, 2, 5), Err(Error::Configuration(_))));
        sim.schedule_exchange(1, 2, 5).unwrap();
        s.topology = Topology::AdHoc;
        s.links.push((0, 2));
        assert!(Simulation::new(s, RunOptions::default()).is_err());
    }
}
