//! Deterministic test fixtures shipped in `fixtures/`.

use std::path::Path;

use ddf_core::pdf::{Gaussian, GaussianMixture};
use ddf_core::sim::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::format::{write_pdf, Pdf};
use crate::report::create_dir;
use crate::scenario::write_scenario;

pub const GAUSSIAN_I: &str = "gaussian_i.json";
pub const GAUSSIAN_J: &str = "gaussian_j.json";
pub const GM14_I: &str = "gm14_i.json";
pub const GM14_J: &str = "gm14_j.json";
pub const GM3_I: &str = "gm3_i.json";
pub const GM3_J: &str = "gm3_j.json";
pub const SCENARIO: &str = "search_reproduction.json";

pub const ALL: [&str; 7] = [GAUSSIAN_I, GAUSSIAN_J, GM14_I, GM14_J, GM3_I, GM3_J, SCENARIO];

/// WEP weight used with the 14-component pair.
pub const GM14_OMEGA: f64 = 0.56922;
/// The 14-component fixtures live inside `[-GM_HALF_WIDTH, GM_HALF_WIDTH]^2`.
pub const GM_HALF_WIDTH: f64 = 10.0;

const GM14_SEED: u64 = 1;
const GM3_SEED: u64 = 3;

/// `m` random 2-D components: means uniform in `[-spread, spread]^2`,
/// randomly rotated covariances with eigenvalues in `[0.3, 1.5]`, weights
/// drawn from `[0.2, 1]` and normalized.
pub fn random_mixture<R: Rng>(rng: &mut R, m: usize, spread: f64) -> GaussianMixture {
    let comps = (0..m)
        .map(|_| {
            let mean = [rng.random_range(-spread..spread), rng.random_range(-spread..spread)];
            let (a, b) = (rng.random_range(0.3..1.5), rng.random_range(0.3..1.5));
            let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (c, s) = (t.cos(), t.sin());
            let cov = [a * c * c + b * s * s, (a - b) * c * s, (a - b) * c * s, a * s * s + b * c * c];
            let g = Gaussian::from_slices(&mean, &cov).expect("eigenvalues bounded away from zero");
            (rng.random_range(0.2..1.0), g)
        })
        .collect();
    GaussianMixture::from_unnormalized(comps).expect("positive weights")
}

fn pair(seed: u64, m: usize, spread: f64) -> (GaussianMixture, GaussianMixture) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_mixture(&mut rng, m, spread), random_mixture(&mut rng, m, spread))
}

/// The 14 + 14 component pair.
pub fn gm14_pair() -> (GaussianMixture, GaussianMixture) {
    pair(GM14_SEED, 14, 4.0)
}

/// A 3 + 3 component pair for convergence studies.
pub fn gm3_pair() -> (GaussianMixture, GaussianMixture) {
    pair(GM3_SEED, 3, 2.5)
}

pub fn gaussian_pair() -> (Gaussian, Gaussian) {
    let a = Gaussian::from_slices(&[-1.0, 0.5], &[1.2, 0.3, 0.3, 0.8]).expect("static covariance");
    let b = Gaussian::from_slices(&[1.0, -0.5], &[0.7, -0.2, -0.2, 1.5]).expect("static covariance");
    (a, b)
}

/// Writes every fixture into `dir`.
pub fn write_all(dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let (gi, gj) = gaussian_pair();
    write_pdf(&dir.join(GAUSSIAN_I), &Pdf::Gaussian(gi))?;
    write_pdf(&dir.join(GAUSSIAN_J), &Pdf::Gaussian(gj))?;
    let (a, b) = gm14_pair();
    write_pdf(&dir.join(GM14_I), &Pdf::Mixture(a))?;
    write_pdf(&dir.join(GM14_J), &Pdf::Mixture(b))?;
    let (a, b) = gm3_pair();
    write_pdf(&dir.join(GM3_I), &Pdf::Mixture(a))?;
    write_pdf(&dir.join(GM3_J), &Pdf::Mixture(b))?;
    write_scenario(&dir.join(SCENARIO), &Scenario::search_reproduction())
}
