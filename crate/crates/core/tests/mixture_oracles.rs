use ddf_core::mixture::{
    build_ratio_components, gm_exact_fuse, gm_fuse, gm_wep_fuse, is_moment_match, select_proposal, Execution, FusionParams, RatioComponent,
    WepCommonDensity,
};
use ddf_core::pdf::{grid_kld, FnLogDensity, Gaussian, GaussianMixture, Grid, GridPdf, LogDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn g(mean: &[f64], cov: &[f64]) -> Gaussian {
    Gaussian::from_slices(mean, cov).unwrap()
}

fn raster(grid: &Grid, d: &impl LogDensity) -> GridPdf {
    GridPdf::from_log_density(grid.clone(), |x| d.log_density(x)).unwrap()
}

fn square(half: f64, n: usize) -> Grid {
    Grid::new(vec![(-half, half), (-half, half)], vec![n, n]).unwrap()
}

fn random_mixture(rng: &mut ChaCha8Rng, m: usize, spread: f64) -> GaussianMixture {
    let comps = (0..m)
        .map(|_| {
            let mean = [rng.random_range(-spread..spread), rng.random_range(-spread..spread)];
            let (a, b) = (rng.random_range(0.3..1.5), rng.random_range(0.3..1.5));
            let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (c, s) = (t.cos(), t.sin());
            let cov = [a * c * c + b * s * s, (a - b) * c * s, (a - b) * c * s, a * s * s + b * c * c];
            (rng.random_range(0.2..1.0), g(&mean, &cov))
        })
        .collect();
    GaussianMixture::from_unnormalized(comps).unwrap()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn ratio_moments_match_quadrature() {
    let comp_g = Gaussian::scalar(0.0, 0.5).unwrap();
    let u = Gaussian::scalar(0.0, 4.0).unwrap();
    let comp = RatioComponent { q: 0, r: 0, base_log_weight: 0.0, gaussian: comp_g.clone(), denominator: &u };
    let unit = Gaussian::scalar(0.0, 1.0).unwrap();
    let proposal = select_proposal(&comp, &unit, &unit, 1.0).unwrap();

    // Quadrature of N(x; 0, 0.5) / N(x; 0, 4) on [-6, 6].
    let n = 120_001;
    let dx = 12.0 / (n - 1) as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let x = -6.0 + k as f64 * dx;
        let r = (comp_g.log_pdf(&[x]) - u.log_pdf(&[x])).exp() * dx;
        m0 += r;
        m1 += r * x;
        m2 += r * x * x;
    }
    let (mass, mean) = (m0, m1 / m0);
    let var = m2 / m0 - mean * mean;

    let n_samples = 2000;
    let mut masses = Vec::new();
    let mut vars = Vec::new();
    let mut within = 0;
    for seed in 0..20 {
        let mm = is_moment_match(&comp, &proposal, n_samples, seed).unwrap();
        masses.push(mm.log_weight.exp());
        vars.push(mm.gaussian.cov()[(0, 0)]);
        if (mm.gaussian.mean()[0] - mean).abs() <= 3.0 * mm.diagnostics.mean_std_error[0] {
            within += 1;
        }
    }
    assert!(within >= 18, "{within}/20 means within 3 standard errors");
    for (est, truth) in [(masses, mass), (vars, var)] {
        let (m, sd) = mean_sd(&est);
        assert!((m - truth).abs() <= 3.0 * sd / 20f64.sqrt(), "{m} vs {truth} (sd {sd})");
    }
}

#[test]
fn wep_of_two_gaussians_is_closed_form() {
    let pi = GaussianMixture::single(Gaussian::scalar(0.0, 1.0).unwrap());
    let pj = GaussianMixture::single(Gaussian::scalar(2.0, 1.0).unwrap());
    let params = FusionParams::for_domain_width(12.0);
    let out = gm_wep_fuse(&pi, &pj, 0.5, &params).unwrap().mixture;
    let tol = 5.0 / (params.n_samples as f64).sqrt();
    let fused = out.moment_match().unwrap();
    assert!((fused.mean()[0] - 1.0).abs() < tol);
    assert!((fused.cov()[(0, 0)] - 1.0).abs() < tol);
}

#[test]
fn full_redundancy_is_identity() {
    let p = GaussianMixture::single(Gaussian::scalar(0.0, 1.0).unwrap());
    let params = FusionParams::for_domain_width(12.0);
    let out = gm_exact_fuse(&p, &p, &p, &params).unwrap().mixture;
    let tol = 5.0 / (params.n_samples as f64).sqrt();
    let fused = out.moment_match().unwrap();
    assert!(fused.mean()[0].abs() < tol);
    assert!((fused.cov()[(0, 0)] - 1.0).abs() < tol);
}

fn two_component_pair() -> (GaussianMixture, GaussianMixture) {
    let pi = GaussianMixture::new(vec![
        (0.6, g(&[-1.0, 0.5], &[1.0, 0.2, 0.2, 0.8])),
        (0.4, g(&[1.5, -0.5], &[0.6, 0.0, 0.0, 1.2])),
    ])
    .unwrap();
    let pj = GaussianMixture::new(vec![
        (0.5, g(&[0.0, 1.0], &[0.9, -0.1, -0.1, 0.7])),
        (0.5, g(&[1.0, -1.0], &[1.1, 0.3, 0.3, 0.9])),
    ])
    .unwrap();
    (pi, pj)
}

#[test]
fn wep_endpoint_returns_other_side() {
    let (pi, pj) = two_component_pair();
    let grid = square(8.0, 160);
    let params = FusionParams::for_domain_width(16.0);
    let out = gm_wep_fuse(&pi, &pj, 0.0, &params).unwrap().mixture;
    let k = grid_kld(&raster(&grid, &pj), &raster(&grid, &out)).unwrap();
    assert!(k <= 5.0 / (params.n_samples as f64).sqrt(), "{k}");
}

#[test]
fn no_new_information_returns_local() {
    let (pi, pj) = two_component_pair();
    let grid = square(8.0, 160);
    let params = FusionParams::for_domain_width(16.0);
    let out = gm_exact_fuse(&pi, &pj, &pj, &params).unwrap().mixture;
    let k = grid_kld(&raster(&grid, &pi), &raster(&grid, &out)).unwrap();
    assert!(k <= 5.0 / (params.n_samples as f64).sqrt(), "{k}");
}

#[test]
fn exact_with_broad_common_matches_grid_oracle() {
    let (pi, pj) = two_component_pair();
    let pc = GaussianMixture::single(g(&[0.0, 0.0], &[9.0, 0.0, 0.0, 9.0]));
    let grid = square(8.0, 200);
    let truth = GridPdf::from_log_density(grid.clone(), |x| pi.log_pdf(x) + pj.log_pdf(x) - pc.log_pdf(x)).unwrap();
    let out = gm_exact_fuse(&pi, &pj, &pc, &FusionParams::for_domain_width(16.0)).unwrap().mixture;
    let k = grid_kld(&truth, &raster(&grid, &out)).unwrap();
    assert!(k <= 0.05, "{k}");
}

#[test]
fn fourteen_by_fourteen_gives_196_components_and_is_thread_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pi = random_mixture(&mut rng, 14, 4.0);
    let pj = random_mixture(&mut rng, 14, 4.0);
    let base = FusionParams::for_domain_width(20.0).with_samples(200).with_prune_threshold(0.0);
    let par = gm_wep_fuse(&pi, &pj, 0.56922, &base.with_execution(Execution::Parallel)).unwrap();
    let seq = gm_wep_fuse(&pi, &pj, 0.56922, &base.with_execution(Execution::Sequential)).unwrap();
    assert_eq!(par.mixture.len(), 196);
    assert_eq!(par, seq);
}

#[test]
fn pruning_discards_bounded_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pi = random_mixture(&mut rng, 6, 6.0);
    let pj = random_mixture(&mut rng, 5, 6.0);
    let t = 1e-3;
    let params = FusionParams::for_domain_width(24.0).with_samples(200).with_prune_threshold(t);
    let out = gm_wep_fuse(&pi, &pj, 0.4, &params).unwrap();
    assert!(out.discarded_fraction <= 30.0 * t);
    assert_eq!(out.mixture.len() + out.pruned, 30);
}

/// Each ratio component's mean estimated by its own importance sampler
/// (`N_s` samples) against estimating it from one shared sample set drawn
/// from `p_i` with the same total budget (`M_i M_j N_s`).
///
/// Measured on this fixture the shared sampler has the lower spread for
/// nearly every component (median sd ratio about 22 at the default α, about
/// 5 at α = 1): every shared sample informs all components, so an equal
/// sample budget favours it.
#[test]
#[ignore = "component-wise IS is not lower-variance than whole-pdf IS at an equal sample budget on this fixture"]
fn componentwise_sampling_has_lower_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pi = random_mixture(&mut rng, 14, 4.0);
    let pj = random_mixture(&mut rng, 14, 4.0);
    let u = WepCommonDensity { p_i: &pi, p_j: &pj, omega: 0.56922 };
    let comps = build_ratio_components(&pi, &pj, &u).unwrap();
    let params = FusionParams::for_domain_width(20.0).with_samples(200);
    let n_s = params.n_samples;

    let mut own = vec![Vec::new(); comps.len()];
    let mut shared = vec![Vec::new(); comps.len()];
    for seed in 0..20u64 {
        for (k, c) in comps.iter().enumerate() {
            let mi = &pi.components()[c.q].gaussian;
            let mj = &pj.components()[c.r].gaussian;
            let proposal = select_proposal(c, mi, mj, params.alpha).unwrap();
            own[k].push(is_moment_match(c, &proposal, n_s, seed).unwrap().gaussian.mean()[0]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut sw = vec![0.0; comps.len()];
        let mut swx = vec![0.0; comps.len()];
        for _ in 0..n_s * comps.len() {
            let x = pi.components()[pick(&mut rng, &pi)].gaussian.sample(&mut rng);
            let log_h = u.log_density(x.as_slice()) + pi.log_pdf(x.as_slice());
            for (k, c) in comps.iter().enumerate() {
                let w = (c.gaussian.log_pdf(x.as_slice()) - log_h).exp();
                sw[k] += w;
                swx[k] += w * x[0];
            }
        }
        for k in 0..comps.len() {
            shared[k].push(swx[k] / sw[k]);
        }
    }
    let mut ratios: Vec<f64> =
        own.iter().zip(&shared).map(|(a, b)| mean_sd(a).1 / mean_sd(b).1).filter(|r| r.is_finite()).collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!(median < 1.0, "median sd ratio (component-wise / shared) {median}");
}

fn pick(rng: &mut ChaCha8Rng, m: &GaussianMixture) -> usize {
    let mut t: f64 = rng.random();
    for (k, c) in m.components().iter().enumerate() {
        t -= c.weight;
        if t <= 0.0 {
            return k;
        }
    }
    m.len() - 1
}

#[test]
fn custom_denominator_through_closure() {
    let p = GaussianMixture::single(Gaussian::scalar(1.0, 2.0).unwrap());
    let flat = FnLogDensity::new(1, |_: &[f64]| 0.0);
    let out = gm_fuse(&p, &p, &flat, &FusionParams::for_domain_width(12.0)).unwrap().mixture;
    let m = out.moment_match().unwrap();
    assert!((m.mean()[0] - 1.0).abs() < 0.05);
    assert!((m.cov()[(0, 0)] - 1.0).abs() < 0.1);
}
