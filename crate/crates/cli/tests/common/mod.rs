//! Synthetic end-to-end fixture: a blob dataset, an original model's
//! prediction runs and a handful of mutants, plus the run configuration
//! tying them together.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topomap::datamodel::save_dataset;
use topomap::io::write_tmx;
use topomap::synthetic::{nested_blobs, BlobFixture};

pub const RUNS: usize = 20;
pub const CLASSES: usize = 3;
pub const BLOBS: usize = 6;

pub struct Fixture {
    pub root: PathBuf,
    pub config: PathBuf,
    pub blobs: BlobFixture,
}

/// `RUNS × |test|` class predictions. Input `i` is mispredicted with
/// probability `err(i)`; a misprediction names the next class.
pub fn predictions(truth: &[usize], err: impl Fn(usize) -> f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((RUNS, truth.len()), |(_, i)| {
        let wrong = rng.random::<f64>() < err(i);
        let c = if wrong { (truth[i] + 1) % CLASSES } else { truth[i] };
        c as f64
    })
}

/// Writes the dataset, the original predictions, five mutants and
/// `run.json` (with the given candidates) under `root`.
pub fn build(root: &Path, candidates: &str) -> Fixture {
    let blobs = nested_blobs(CLASSES, BLOBS / CLASSES, 360, 4, 11);
    let manifest = save_dataset(&blobs.to_dataset().unwrap(), &root.join("data")).unwrap();
    let truth: Vec<usize> = blobs.test.iter().map(|&r| blobs.labels[r]).collect();
    let blob_of: Vec<usize> = blobs.test.iter().map(|&r| blobs.blobs[r]).collect();

    let preds = root.join("preds");
    write_tmx(&preds.join("original.tmx"), &predictions(&truth, |_| 0.1, 1)).unwrap();
    write_tmx(&preds.join("wrong.tmx"), &predictions(&truth, |_| 1.0, 2)).unwrap();
    let mut manifest_csv = String::from("mutant_id,operator,configuration,predictions_path\n");
    manifest_csv.push_str("self,identity,none,preds/original.tmx\n");
    manifest_csv.push_str("always_wrong,constant,flip_all,preds/wrong.tmx\n");
    for (j, dense) in [0usize, 2, 4].into_iter().enumerate() {
        let p = predictions(&truth, |i| if blob_of[i] == dense { 0.7 } else { 0.1 }, 10 + j as u64);
        write_tmx(&preds.join(format!("blob{dense}.tmx")), &p).unwrap();
        let op = if j < 2 { "noise" } else { "drop" };
        manifest_csv.push_str(&format!("blob{dense},{op},rate=0.{j},preds/blob{dense}.tmx\n"));
    }
    std::fs::write(root.join("mutants.csv"), manifest_csv).unwrap();

    let config = root.join("run.json");
    let text = format!(
        r#"{{
  "dataset": "{}",
  "output": "out",
  "seed": 3,
  "candidates": {candidates},
  "classifier": {{"hidden_layers": [16], "epochs": 20, "batch": 32, "learning_rate": 0.01}},
  "mutation": {{"original": "preds/original.tmx", "mutants": "mutants.csv"}}
}}"#,
        manifest.display()
    );
    std::fs::write(&config, text).unwrap();
    Fixture {
        root: root.to_path_buf(),
        config,
        blobs,
    }
}

pub const ONE_CANDIDATE: &str =
    r#"[{"embedding": {"method": "pca"}, "clustering": {"method": "kmeans"}, "k": 6}]"#;

pub fn run(args: &[&str]) -> i32 {
    topomap_cli::run(std::iter::once("topomap").chain(args.iter().copied()))
}

pub fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}
