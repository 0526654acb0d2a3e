//! Choosing the number of clusters by growing `k` in steps of the class
//! count until the majority-vote classification accuracy stops improving.

use std::path::Path;

use ndarray::ArrayView2;

use crate::clustering::{self, ClusterModel, ClusterSpec};
use crate::error::{Error, Result};
use crate::io::{self, CsvTable};

/// The stop rule fires when the mean of the last two accuracy derivatives
/// falls below this.
pub const PLATEAU_THRESHOLD: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStep {
    pub k: usize,
    pub accuracy: f64,
    pub derivative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelectionTrace {
    pub iterations: Vec<KStep>,
    pub k_star: usize,
    /// Set when `k` outgrew the training rows before accuracy plateaued.
    pub exhausted: bool,
}

impl KSelectionTrace {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["k", "accuracy", "derivative"]);
        for s in &self.iterations {
            t.push([s.k.to_string(), s.accuracy.to_string(), s.derivative.to_string()]);
        }
        t
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_csv().write(path)
    }

    /// Reads a trace CSV back. `exhausted` is not stored and is reported as
    /// whether the plateau rule failed on the last row.
    pub fn load(path: &Path) -> Result<Self> {
        let t = CsvTable::read(path)?;
        if t.header != ["k", "accuracy", "derivative"] {
            return Err(Error::parse(path, 1, "expected header `k,accuracy,derivative`"));
        }
        let mut iterations = Vec::with_capacity(t.records.len());
        for (i, r) in t.records.iter().enumerate() {
            let bad = |_| Error::parse(path, i + 2, "bad trace row");
            iterations.push(KStep {
                k: r[0].parse().map_err(|_| Error::parse(path, i + 2, "bad k"))?,
                accuracy: r[1].parse().map_err(bad)?,
                derivative: r[2].parse().map_err(bad)?,
            });
        }
        let last = iterations
            .last()
            .ok_or_else(|| Error::parse(path, 2, "empty trace"))?;
        let prev = if iterations.len() >= 2 {
            iterations[iterations.len() - 2].derivative
        } else {
            0.0
        };
        Ok(KSelectionTrace {
            k_star: last.k,
            exhausted: (last.derivative + prev) / 2.0 >= PLATEAU_THRESHOLD,
            iterations,
        })
    }
}

fn arg_max_smallest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Labels each cluster with the most frequent training label among its
/// rows (ties to the smallest label); clusters without training rows get
/// the overall majority label.
pub fn majority_label_map(model: &ClusterModel, y_train: &[usize]) -> Result<Vec<usize>> {
    if model.assignments.len() != y_train.len() {
        return Err(Error::RowCountMismatch {
            what: "training labels".into(),
            expected: model.assignments.len(),
            found: y_train.len(),
        });
    }
    let n_labels = y_train.iter().max().map_or(1, |m| m + 1);
    let mut counts = vec![vec![0usize; n_labels]; model.k];
    let mut global = vec![0usize; n_labels];
    for (&c, &y) in model.assignments.iter().zip(y_train) {
        counts[c][y] += 1;
        global[y] += 1;
    }
    let fallback = arg_max_smallest(&global);
    Ok(counts
        .iter()
        .map(|row| {
            if row.iter().all(|&c| c == 0) {
                fallback
            } else {
                arg_max_smallest(row)
            }
        })
        .collect())
}

/// Accuracy of "cluster → majority label" as a classifier on the test rows.
pub fn majority_vote_accuracy(
    model: &ClusterModel,
    y_train: &[usize],
    e_test: ArrayView2<'_, f64>,
    y_test: &[usize],
) -> Result<f64> {
    if e_test.nrows() != y_test.len() {
        return Err(Error::RowCountMismatch {
            what: "test labels".into(),
            expected: e_test.nrows(),
            found: y_test.len(),
        });
    }
    if y_test.is_empty() {
        return Err(Error::InvalidInput("no test rows".into()));
    }
    let labels = majority_label_map(model, y_train)?;
    let ids = clustering::assign(model, e_test)?;
    let correct = ids
        .iter()
        .zip(y_test)
        .filter(|(&c, &y)| labels[c] == y)
        .count();
    Ok(correct as f64 / y_test.len() as f64)
}

/// Grows `k` from `n_classes` in steps of `n_classes`, returning every
/// evaluated step. The clustering seed is the same for every `k`.
pub fn select_k(
    e_train: ArrayView2<'_, f64>,
    e_test: ArrayView2<'_, f64>,
    y_train: &[usize],
    y_test: &[usize],
    n_classes: usize,
    spec: &ClusterSpec,
    seed: u64,
) -> Result<KSelectionTrace> {
    select_k_with(e_train, e_test, y_train, y_test, n_classes, spec, seed, |_| {})
}

/// [`select_k`], handing each fitted model to `on_model` (for persistence).
#[allow(clippy::too_many_arguments)]
pub fn select_k_with(
    e_train: ArrayView2<'_, f64>,
    e_test: ArrayView2<'_, f64>,
    y_train: &[usize],
    y_test: &[usize],
    n_classes: usize,
    spec: &ClusterSpec,
    seed: u64,
    mut on_model: impl FnMut(&ClusterModel),
) -> Result<KSelectionTrace> {
    if n_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "k selection needs at least two classes, got {n_classes}"
        )));
    }
    if e_train.nrows() != y_train.len() {
        return Err(Error::RowCountMismatch {
            what: "training labels".into(),
            expected: e_train.nrows(),
            found: y_train.len(),
        });
    }
    if n_classes > e_train.nrows() {
        return Err(Error::KTooLarge {
            k: n_classes,
            rows: e_train.nrows(),
        });
    }

    let (mut k0, mut acc0, mut delta0) = (0usize, 0.0f64, 0.0f64);
    let mut k = n_classes;
    let mut iterations = Vec::new();
    loop {
        if k > e_train.nrows() {
            return Ok(KSelectionTrace {
                iterations,
                k_star: k0,
                exhausted: true,
            });
        }
        let model = spec.fit(e_train, k, seed)?;
        on_model(&model);
        let acc1 = majority_vote_accuracy(&model, y_train, e_test, y_test)?;
        let delta1 = (acc1 - acc0) / (k - k0) as f64;
        iterations.push(KStep {
            k,
            accuracy: acc1,
            derivative: delta1,
        });
        if (delta1 + delta0) / 2.0 < PLATEAU_THRESHOLD {
            return Ok(KSelectionTrace {
                iterations,
                k_star: k,
                exhausted: false,
            });
        }
        delta0 = delta1;
        acc0 = acc1;
        k0 = k;
        k += n_classes;
    }
}

/// Writes a trace to `path` as `k,accuracy,derivative`.
pub fn save_trace(trace: &KSelectionTrace, path: &Path) -> Result<()> {
    io::write_atomic(path, trace.to_csv().to_text().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClusterMethod;
    use crate::synthetic;
    use ndarray::{array, Array2, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn model_with(assignments: Vec<usize>, k: usize) -> ClusterModel {
        ClusterModel {
            method: ClusterMethod::Kmeans,
            k,
            centroids: Array2::zeros((k, 1)),
            empty: vec![false; k],
            assignments,
            seed: 0,
            inertia: 0.0,
        }
    }

    #[test]
    fn strict_majority_wins() {
        let m = model_with(vec![0, 0, 0], 1);
        assert_eq!(majority_label_map(&m, &[1, 1, 2]).unwrap(), vec![1]);
    }

    #[test]
    fn ties_go_to_the_smallest_label() {
        let m = model_with(vec![0, 0], 1);
        assert_eq!(majority_label_map(&m, &[1, 0]).unwrap(), vec![0]);
    }

    #[test]
    fn clusters_without_rows_get_the_global_majority() {
        let m = model_with(vec![0, 0, 0, 2], 3);
        assert_eq!(majority_label_map(&m, &[2, 2, 1, 0]).unwrap(), vec![2, 2, 0]);
    }

    #[test]
    fn label_map_matches_a_hash_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let assign: Vec<usize> = (0..50).map(|_| rng.random_range(0..6)).collect();
        let y: Vec<usize> = (0..50).map(|_| rng.random_range(0..4)).collect();
        let m = model_with(assign.clone(), 7);
        let got = majority_label_map(&m, &y).unwrap();

        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        let mut global: HashMap<usize, usize> = HashMap::new();
        for (&c, &l) in assign.iter().zip(&y) {
            *counts.entry((c, l)).or_default() += 1;
            *global.entry(l).or_default() += 1;
        }
        let pick = |f: &dyn Fn(usize) -> usize| {
            let top = (0..4).map(f).max().unwrap();
            (0..4).find(|&l| f(l) == top).unwrap()
        };
        let global_major = pick(&|l| *global.get(&l).unwrap_or(&0));
        for c in 0..7 {
            let total: usize = (0..4).map(|l| *counts.get(&(c, l)).unwrap_or(&0)).sum();
            let want = if total == 0 {
                global_major
            } else {
                pick(&|l| *counts.get(&(c, l)).unwrap_or(&0))
            };
            assert_eq!(got[c], want, "cluster {c}");
        }
    }

    #[test]
    fn flat_accuracy_stops_at_the_third_step() {
        // one repeated point per class: every k gives accuracy 1, so the first
        // derivative is 1/n and the rule fires once it has been averaged out
        let n = 3;
        let points = array![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let reps = 6;
        let idx: Vec<usize> = (0..n * reps).map(|i| i % n).collect();
        let e = points.select(Axis(0), &idx);
        let spec = ClusterSpec::default();
        let t = select_k(e.view(), e.view(), &idx, &idx, n, &spec, 1).unwrap();
        let ks: Vec<usize> = t.iterations.iter().map(|s| s.k).collect();
        assert_eq!(ks, vec![3, 6, 9]);
        assert_eq!(t.k_star, 9);
        assert!(t.iterations.iter().all(|s| s.accuracy == 1.0));
        assert!(!t.exhausted);
    }

    #[test]
    fn running_out_of_rows_is_flagged() {
        // accuracy keeps rising with k on a 1-D gradient of labels
        let n_rows = 7;
        let e = Array2::from_shape_fn((n_rows, 1), |(i, _)| i as f64);
        let y: Vec<usize> = (0..n_rows).map(|i| if i % 2 == 0 { 0 } else { 1 }).collect();
        let t = select_k(e.view(), e.view(), &y, &y, 2, &ClusterSpec::default(), 0).unwrap();
        assert!(t.exhausted);
        assert_eq!(t.k_star, t.iterations.last().unwrap().k);
        assert_eq!(t.k_star, 6);
    }

    #[test]
    fn planted_sub_blobs_select_nine() {
        let f = synthetic::nested_blobs(3, 3, 500, 4, 11);
        let (tr, te) = (&f.train, &f.test);
        let x = &f.features;
        let t = select_k(
            x.select(Axis(0), tr).view(),
            x.select(Axis(0), te).view(),
            &tr.iter().map(|&r| f.labels[r]).collect::<Vec<_>>(),
            &te.iter().map(|&r| f.labels[r]).collect::<Vec<_>>(),
            3,
            &ClusterSpec::default(),
            5,
        )
        .unwrap();
        assert_eq!(t.k_star, 9);
        assert!(t.iterations.last().unwrap().accuracy >= 0.95);
        assert!(t.iterations.iter().all(|s| s.k % 3 == 0));
    }

    #[test]
    fn trace_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let t = KSelectionTrace {
            iterations: vec![
                KStep { k: 2, accuracy: 0.5, derivative: 0.25 },
                KStep { k: 4, accuracy: 0.5, derivative: 0.0 },
                KStep { k: 6, accuracy: 0.5, derivative: 0.0 },
            ],
            k_star: 6,
            exhausted: false,
        };
        save_trace(&t, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().next(), Some("k,accuracy,derivative"));
        assert_eq!(KSelectionTrace::load(&p).unwrap(), t);
    }

    #[test]
    fn fewer_than_two_classes_is_rejected() {
        let e = Array2::<f64>::zeros((4, 1));
        assert!(select_k(e.view(), e.view(), &[0; 4], &[0; 4], 1, &ClusterSpec::default(), 0).is_err());
    }
}
