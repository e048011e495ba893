use ddf_core::hybrid::{
    hybrid_exact_fuse, hybrid_joint_kld, hybrid_local_update, hybrid_wep_fuse, FactorSelector, HybridBelief,
    OmegaAssignment,
};
use ddf_core::pdf::{kld_masses, DiscreteDist, Grid, GridPdf};
use ddf_core::sensor::{Detection, SensorModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn region_grid(r: usize, n: usize) -> Grid {
    let x0 = r as f64 * 5.0;
    Grid::new(vec![(x0, x0 + 5.0), (0.0, 5.0)], vec![n, n]).unwrap()
}

fn random_prior(rng: &mut ChaCha8Rng, n_regions: usize, n: usize) -> HybridBelief {
    let weights: Vec<f64> = (0..n_regions).map(|_| rng.random_range(0.1..1.0)).collect();
    let conds = (0..n_regions)
        .map(|r| {
            let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.5..1.5)).collect();
            GridPdf::from_masses(region_grid(r, n), m).unwrap()
        })
        .collect();
    HybridBelief::new(DiscreteDist::from_weights(weights).unwrap(), conds).unwrap()
}

/// Applies a random per-cell likelihood to the conditionals of `regions`.
/// Other conditionals are cloned, as a local update leaves them.
fn with_likelihood(rng: &mut ChaCha8Rng, b: &HybridBelief, regions: &[usize]) -> HybridBelief {
    let mut weights = b.regions().probs().to_vec();
    let conds = b
        .conditionals()
        .iter()
        .enumerate()
        .map(|(r, c)| {
            if !regions.contains(&r) {
                return c.clone();
            }
            let m: Vec<f64> = c.mass().iter().map(|m| m * rng.random_range(0.05..1.0)).collect();
            weights[r] *= m.iter().sum::<f64>();
            GridPdf::from_masses(c.grid().clone(), m).unwrap()
        })
        .collect();
    HybridBelief::new(DiscreteDist::from_weights(weights).unwrap(), conds).unwrap()
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn joint_exact(a: &HybridBelief, b: &HybridBelief, c: &HybridBelief) -> Vec<f64> {
    let (a, b, c) = (a.joint_masses(), b.joint_masses(), c.joint_masses());
    normalize(a.iter().zip(&b).zip(&c).map(|((x, y), z)| if *z > 0.0 { x * y / z } else { 0.0 }).collect())
}

fn joint_wep(a: &HybridBelief, b: &HybridBelief, w: f64) -> Vec<f64> {
    let (a, b) = (a.joint_masses(), b.joint_masses());
    normalize(a.iter().zip(&b).map(|(x, y)| x.powf(w) * y.powf(1.0 - w)).collect())
}

struct Case {
    prior: HybridBelief,
    bi: HybridBelief,
    bj: HybridBelief,
}

fn case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_regions = rng.random_range(1..=6);
    let prior = random_prior(&mut rng, n_regions, 20);
    let pick = |rng: &mut ChaCha8Rng| (0..n_regions).filter(|_| rng.random_bool(0.6)).collect::<Vec<_>>();
    let (ri, rj) = (pick(&mut rng), pick(&mut rng));
    let bi = with_likelihood(&mut rng, &prior, &ri);
    let bj = with_likelihood(&mut rng, &prior, &rj);
    Case { prior, bi, bj }
}

#[test]
fn factorized_exact_equals_whole_joint_exact() {
    for seed in 0..20 {
        let c = case(seed);
        let n = c.prior.n_regions();
        let fused = hybrid_exact_fuse(&c.bi, &c.bj, &c.prior, &FactorSelector::all(n)).unwrap().belief;
        let oracle = joint_exact(&c.bi, &c.bj, &c.prior);
        let k = kld_masses(&oracle, &fused.joint_masses()).unwrap();
        assert!(k <= 1e-9, "seed {seed}: {k}");
    }
}

#[test]
fn tied_factorized_wep_equals_whole_joint_wep() {
    for seed in 0..20 {
        let c = case(seed);
        let n = c.prior.n_regions();
        for w in [0.0, 0.25, 0.56922, 1.0] {
            let fused = hybrid_wep_fuse(&c.bi, &c.bj, &OmegaAssignment::tied(w, n).unwrap(), &FactorSelector::all(n))
                .unwrap()
                .belief;
            let oracle = joint_wep(&c.bi, &c.bj, w);
            let k = kld_masses(&oracle, &fused.joint_masses()).unwrap();
            assert!(k <= 1e-9, "seed {seed}, omega {w}: {k}");
        }
    }
}

#[test]
fn joint_kld_equals_flattened_kld() {
    for seed in 0..10 {
        let c = case(seed);
        let k = hybrid_joint_kld(&c.bi, &c.bj).unwrap();
        let flat = kld_masses(&c.bi.joint_masses(), &c.bj.joint_masses()).unwrap();
        assert!((k.total - flat).abs() <= 1e-9);
        let weighted: f64 = c.bi.regions().probs().iter().zip(&k.per_region).map(|(p, t)| p * t).sum();
        assert!((k.total - k.region_term - weighted).abs() < 1e-12);
    }
}

#[test]
fn dropping_denormalization_terms_is_measurably_wrong() {
    let mut gaps = 0;
    for seed in 0..10 {
        let c = case(seed);
        let n = c.prior.n_regions();
        let fused = hybrid_exact_fuse(&c.bi, &c.bj, &c.prior, &FactorSelector::all(n)).unwrap();
        if fused.log_eta.iter().all(|e| (e - fused.log_eta[0]).abs() < 1e-9) {
            continue;
        }
        let (pi, pj, pc) = (c.bi.regions().probs(), c.bj.regions().probs(), c.prior.regions().probs());
        let naive = DiscreteDist::from_weights((0..n).map(|r| pi[r] * pj[r] / pc[r]).collect()).unwrap();
        let without_eta = HybridBelief::new(naive, fused.belief.conditionals().to_vec()).unwrap();
        let oracle = joint_exact(&c.bi, &c.bj, &c.prior);
        let gap = kld_masses(&oracle, &without_eta.joint_masses()).unwrap();
        assert!(gap > 1e-7, "seed {seed}: gap {gap}");
        gaps += 1;
    }
    assert!(gaps >= 5);
}

#[test]
fn exclusive_regions_are_copied_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let prior = random_prior(&mut rng, 6, 20);
    let b1 = with_likelihood(&mut rng, &prior, &[0, 1, 3, 4]);
    let b2 = with_likelihood(&mut rng, &prior, &[1, 2, 4, 5]);
    let exact = hybrid_exact_fuse(&b1, &b2, &prior, &FactorSelector::all(6)).unwrap().belief;
    for r in [0, 3] {
        assert_eq!(exact.conditional(r), b1.conditional(r));
    }
    for r in [2, 5] {
        assert_eq!(exact.conditional(r), b2.conditional(r));
    }
    let omegas = OmegaAssignment::new(0.5, vec![1.0, 0.5, 0.0, 1.0, 0.5, 0.0]).unwrap();
    let wep = hybrid_wep_fuse(&b1, &b2, &omegas, &FactorSelector::all(6)).unwrap().belief;
    for r in [0, 3] {
        assert_eq!(wep.conditional(r), b1.conditional(r));
    }
    for r in [2, 5] {
        assert_eq!(wep.conditional(r), b2.conditional(r));
    }
}

#[test]
fn no_new_information_from_j_returns_i() {
    let c = case(5);
    let n = c.prior.n_regions();
    let fused = hybrid_exact_fuse(&c.bi, &c.prior, &c.prior, &FactorSelector::all(n)).unwrap().belief;
    assert_eq!(fused.conditionals(), c.bi.conditionals());
    for (a, b) in fused.regions().probs().iter().zip(c.bi.regions().probs()) {
        assert!((a - b).abs() < 1e-15);
    }
}

fn two_region_uniform(n: usize) -> HybridBelief {
    let conds = (0..2).map(|r| GridPdf::uniform(region_grid(r, n))).collect();
    HybridBelief::new(DiscreteDist::uniform(2).unwrap(), conds).unwrap()
}

/// Joint-grid Bayes filter: every cell weighted by its likelihood, then
/// normalized once.
fn joint_bayes(b: &HybridBelief, sensor: &SensorModel, pose: [f64; 2], reps: usize) -> Vec<f64> {
    let mut joint = b.joint_masses();
    let mut offset = 0;
    for c in b.conditionals() {
        c.grid().for_each_center(|i, x| {
            let d2 = (x[0] - pose[0]).powi(2) + (x[1] - pose[1]).powi(2);
            joint[offset + i] *= sensor.likelihood(Detection::NotDetected, d2).powi(reps as i32);
        });
        offset += c.len();
    }
    normalize(joint)
}

#[test]
fn repeated_misses_drain_the_footprint() {
    let b0 = two_region_uniform(25);
    let sensor = SensorModel::new(1.5, 0.8, 1.0).unwrap();
    let pose = [2.5, 2.5];
    let mut b = b0.clone();
    let mut last = b.regions().probs()[0];
    for k in 1..=10 {
        b = hybrid_local_update(&b, Detection::NotDetected, &sensor, &pose).unwrap();
        let p = b.regions().probs()[0];
        assert!(p < last);
        last = p;
        let oracle = joint_bayes(&b0, &sensor, pose, k);
        assert!(kld_masses(&oracle, &b.joint_masses()).unwrap() < 1e-12);
    }
    assert_eq!(b.conditional(1), b0.conditional(1));
    let centre = b.conditional(0).grid().cell_of(&pose).unwrap();
    assert!(b.conditional(0).mass()[centre] < b0.conditional(0).mass()[centre] * 0.01);
}

#[test]
fn uninformative_reading_changes_nothing() {
    let b0 = two_region_uniform(10);
    let sensor = SensorModel::new(2.0, 1e-300, 1.0).unwrap();
    let b = hybrid_local_update(&b0, Detection::NotDetected, &sensor, &[2.5, 2.5]).unwrap();
    assert!(b.conditional(0).max_abs_diff(b0.conditional(0)).unwrap() < 1e-15);
    assert!((b.regions().probs()[0] - 0.5).abs() < 1e-15);
}
