use ddf_core::hybrid::hybrid_joint_kld;
use ddf_core::mixture::Execution;
use ddf_core::sensor::SensorModel;
use ddf_core::sim::{
    replay, run, AgentSpec, ExchangeSpec, FusionMode, Point, RunOptions, Scenario, Simulation, SnapshotPhase,
    Topology, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_walk(rng: &mut ChaCha8Rng, steps: usize) -> Trajectory {
    let mut p: Point = [rng.random_range(1.0..29.0), rng.random_range(1.0..19.0)];
    let mut pts = vec![p];
    for _ in 0..steps {
        p[0] = (p[0] + rng.random_range(-0.6..0.6)).clamp(0.5, 29.5);
        p[1] = (p[1] + rng.random_range(-0.6..0.6)).clamp(0.5, 19.5);
        pts.push(p);
    }
    Trajectory::Waypoints(pts)
}

fn random_scenario(rng: &mut ChaCha8Rng, n_agents: usize, steps: usize, mode: FusionMode) -> Scenario {
    let mut s = Scenario::search_reproduction();
    s.cells_per_axis = 16;
    s.steps = steps;
    s.mode = mode;
    s.seed = rng.random();
    s.target = rng.random_bool(0.5).then(|| [rng.random_range(2.0..28.0), rng.random_range(5.0..15.0)]);
    s.agents = (0..n_agents)
        .map(|_| AgentSpec {
            trajectory: random_walk(rng, steps),
            sensor: SensorModel::new(rng.random_range(1.5..3.0), rng.random_range(0.5..0.95), 1.0).unwrap(),
        })
        .collect();
    s
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (rng.random_range(0..i), i)).collect()
}

#[test]
fn exact_fusion_on_random_trees_matches_centralized_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..6 {
        let n = rng.random_range(2..=5);
        let steps = rng.random_range(20..=200);
        let mut s = random_scenario(&mut rng, n, steps, FusionMode::Exact);
        s.topology = Topology::Tree;
        s.links = random_tree(&mut rng, n);
        s.exchanges = (0..rng.random_range(1..12))
            .map(|_| {
                let (a, b) = s.links[rng.random_range(0..s.links.len())];
                let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                ExchangeSpec { step: rng.random_range(1..=steps), a, b }
            })
            .collect();
        let r = run(&s).unwrap();
        for (id, (b, o)) in r.final_beliefs.iter().zip(r.final_oracles.as_ref().unwrap()).enumerate() {
            let k = hybrid_joint_kld(o, b).unwrap().total;
            assert!(k <= 1e-9, "trial {trial}, agent {id}: {k}");
        }
        for m in &r.metrics {
            assert!(m.kld_to_oracle.unwrap() <= 1e-9);
        }
    }
}

#[test]
fn loopy_wep_stays_valid_and_conservative() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for mode in [FusionMode::WepMinimax, FusionMode::WepFixed(0.5)] {
        let mut s = random_scenario(&mut rng, 3, 200, mode);
        s.target = Some([14.0, 9.0]);
        s.topology = Topology::AdHoc;
        s.links = vec![(0, 1), (1, 2), (0, 2)];
        s.exchanges = (1..=4)
            .flat_map(|k| s.links.clone().into_iter().map(move |(a, b)| ExchangeSpec { step: 50 * k, a, b }))
            .collect();
        let target = s.target.unwrap();
        let region = s.region_of(target).unwrap();
        let r = run(&s).unwrap();
        for (b, o) in r.final_beliefs.iter().zip(r.final_oracles.as_ref().unwrap()) {
            let total: f64 = b.joint_masses().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(b.joint_masses().iter().all(|m| m.is_finite() && *m >= 0.0));
            let cell = o.conditional(region).grid().cell_of(&target).unwrap();
            let truth = o.regions().probs()[region] * o.conditional(region).mass()[cell];
            let fused = b.regions().probs()[region] * b.conditional(region).mass()[cell];
            if truth > 0.0 {
                assert!(fused > 0.0);
            }
        }
    }
}

#[test]
fn replayed_log_reproduces_pre_fusion_beliefs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut s = random_scenario(&mut rng, 2, 80, FusionMode::Exact);
    s.links = vec![(0, 1)];
    s.exchanges = vec![ExchangeSpec { step: 40, a: 0, b: 1 }];
    let r = run(&s).unwrap();
    let before: Vec<_> = r.snapshots.iter().filter(|x| x.phase == SnapshotPhase::BeforeExchange).collect();
    assert_eq!(before.len(), 2);
    for snap in before {
        let own = r.observations.iter().filter(|o| o.agent == snap.agent && o.step <= snap.step);
        assert_eq!(replay(&s, &r.prior, own).unwrap(), snap.belief);
    }
}

#[test]
fn runs_are_deterministic_across_execution_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = random_scenario(&mut rng, 3, 100, FusionMode::WepMinimax);
    s.target = Some(s.agents[0].trajectory.pose(50));
    s.topology = Topology::AdHoc;
    s.links = vec![(0, 1), (1, 2)];
    s.exchanges = vec![ExchangeSpec { step: 50, a: 0, b: 1 }, ExchangeSpec { step: 50, a: 1, b: 2 }];
    let go = |s: &Scenario, execution| {
        let opts = RunOptions { execution, ..RunOptions::default() };
        Simulation::new(s.clone(), opts).unwrap().run_to_end().unwrap()
    };
    let seq = go(&s, Execution::Sequential);
    assert_eq!(seq, go(&s, Execution::Parallel));
    assert_eq!(seq, go(&s, Execution::Sequential));
    s.seed ^= 1;
    assert_ne!(seq.observations, go(&s, Execution::Sequential).observations);
}

#[test]
fn reproduction_messages_carry_only_new_information() {
    let mut s = Scenario::search_reproduction();
    s.cells_per_axis = 30;
    let mut sim = Simulation::new(s, RunOptions { track_oracle: false, ..RunOptions::default() }).unwrap();
    for _ in 0..599 {
        sim.step().unwrap();
    }
    let to_2 = sim.new_information_selector(0, 1).unwrap();
    assert_eq!(to_2.regions(), &[0, 1, 3, 4]);
    assert!(to_2.include_region_weights);
    let to_1 = sim.new_information_selector(1, 0).unwrap();
    assert_eq!(to_1.regions(), &[1, 2, 4, 5]);
    sim.step().unwrap();
    let r = sim.into_report();
    assert_eq!(r.messages.len(), 2);
    assert!(r.payload_cells() < r.whole_joint_cells());
}
