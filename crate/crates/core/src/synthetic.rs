//! Seeded synthetic fixtures with known structure, used by the test suites
//! and handy for smoke-testing a pipeline configuration.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::datamodel::{Dataset, Labels, Split, Task};
use crate::error::Result;

const CLASS_SPREAD: f64 = 40.0;
const SUB_SPREAD: f64 = 6.0;
const NOISE: f64 = 0.5;

/// Points drawn around `classes × subs` planted blob centers.
#[derive(Debug, Clone)]
pub struct BlobFixture {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    /// Planted blob id, `class * subs + sub`.
    pub blobs: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub n_classes: usize,
}

impl BlobFixture {
    pub fn to_dataset(&self) -> Result<Dataset> {
        let mut split = vec![Split::Train; self.features.nrows()];
        for &t in &self.test {
            split[t] = Split::Test;
        }
        Dataset::new(
            self.features.clone(),
            Labels::Categorical(self.labels.clone()),
            split,
            Task::Classification,
            Some(self.n_classes),
        )
    }
}

/// Classes sit far apart on the coordinate axes; each holds `subs` tighter
/// sub-blobs. Rows cycle through the blobs; every tenth-row residue ≥ 7 is a
/// test row (70/30 split). Requires `dim ≥ classes`.
pub fn nested_blobs(classes: usize, subs: usize, n: usize, dim: usize, seed: u64) -> BlobFixture {
    assert!(dim >= classes, "need one axis per class");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE).expect("valid normal");
    let unit = Normal::new(0.0, 1.0).expect("valid normal");

    let n_blobs = classes * subs;
    let mut centers = Array2::<f64>::zeros((n_blobs, dim));
    for c in 0..classes {
        for s in 0..subs {
            let b = c * subs + s;
            let dir: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            for d in 0..dim {
                let base = if d == c { CLASS_SPREAD } else { 0.0 };
                centers[[b, d]] = base + SUB_SPREAD * dir[d] / norm;
            }
        }
    }

    let blobs: Vec<usize> = (0..n).map(|i| i % n_blobs).collect();
    let labels: Vec<usize> = blobs.iter().map(|b| b / subs).collect();
    let features =
        Array2::from_shape_fn((n, dim), |(i, d)| centers[[blobs[i], d]] + noise.sample(&mut rng));
    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % 10 < 7);
    BlobFixture {
        features,
        labels,
        blobs,
        train,
        test,
        n_classes: classes,
    }
}

/// `n` rows of uniform noise in `[-1, 1]^dim`.
pub fn uniform_noise(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, dim), || rng.random_range(-1.0..1.0))
}

/// Per-run misprediction bits of an original model on `clusters ×
/// per_cluster` test inputs, plus the uniform draws behind them so mutants
/// can reuse the same randomness. Input `i` lies in cluster `i % clusters`.
#[derive(Debug, Clone)]
pub struct PlantedRuns {
    pub clusters_of_inputs: Vec<usize>,
    pub original: Array2<bool>,
    pub base_error: f64,
    uniforms: Array2<f64>,
    per_cluster: usize,
}

impl PlantedRuns {
    pub fn new(clusters: usize, per_cluster: usize, runs: usize, base_error: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = clusters * per_cluster;
        let uniforms = Array2::from_shape_simple_fn((runs, n), || rng.random::<f64>());
        PlantedRuns {
            clusters_of_inputs: (0..n).map(|i| i % clusters).collect(),
            original: uniforms.mapv(|u| u < base_error),
            base_error,
            uniforms,
            per_cluster,
        }
    }

    /// A mutant that mispredicts a planted set of weak inputs with
    /// probability `weak_error` and every other input exactly like the
    /// original. Each cluster in `dense` gets `round(dense_fraction ·
    /// per_cluster)` weak inputs, every other cluster
    /// `round(background_fraction · per_cluster)`. Returns the bits and the
    /// weak mask.
    pub fn mutant(
        &self,
        dense: &[usize],
        dense_fraction: f64,
        background_fraction: f64,
        weak_error: f64,
        seed: u64,
    ) -> (Array2<bool>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.clusters_of_inputs.len();
        let k = n / self.per_cluster;
        let mut weak = vec![false; n];
        for c in 0..k {
            let frac = if dense.contains(&c) { dense_fraction } else { background_fraction };
            let count = (frac * self.per_cluster as f64).round() as usize;
            let members: Vec<usize> = (0..n).filter(|&i| i % k == c).collect();
            for j in rand::seq::index::sample(&mut rng, members.len(), count.min(members.len())) {
                weak[members[j]] = true;
            }
        }
        let bits = Array2::from_shape_fn(self.uniforms.dim(), |(r, i)| {
            let p = if weak[i] { weak_error } else { self.base_error };
            self.uniforms[[r, i]] < p
        });
        (bits, weak)
    }
}
