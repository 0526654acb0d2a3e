use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{empty_flags, inertia_of, nearest, sq_dist, ClusterMethod, ClusterModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 2,
            seed: 0,
            restarts: 10,
            max_iter: 300,
        }
    }
}

/// Outcome of one Lloyd descent.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Best-of-`restarts` k-means with k-means++ seeding.
pub fn kmeans_fit(data: ArrayView2<'_, f64>, params: KMeansParams) -> Result<ClusterModel> {
    let n = data.nrows();
    if params.k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if params.k > n {
        return Err(Error::KTooLarge { k: params.k, rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<LloydRun> = None;
    for _ in 0..params.restarts.max(1) {
        let init = plus_plus(data, params.k, &mut rng);
        let run = lloyd(data, init, params.max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(ClusterModel {
        method: ClusterMethod::Kmeans,
        k: params.k,
        empty: empty_flags(params.k, &best.assignments),
        centroids: best.centroids,
        assignments: best.assignments,
        seed: params.seed,
        inertia: best.inertia,
    })
}

fn plus_plus(data: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding at the tail
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    data.select(ndarray::Axis(0), &chosen)
}

/// Lloyd iterations from `init` until the assignment stops changing or
/// `max_iter` steps. A cluster left empty after an assignment step is moved
/// onto the row farthest from its own centroid.
pub fn lloyd(data: ArrayView2<'_, f64>, init: Array2<f64>, max_iter: usize) -> LloydRun {
    let n = data.nrows();
    let k = init.nrows();
    let dim = data.ncols();
    let mut centroids = init;
    let mut assign = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(&centroids, data.row(i));
            dists[i] = d;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        // Re-seed empty clusters; a reseeded row's distance drops to zero,
        // so the objective cannot increase.
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| !taken[i] && counts[assign[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                if dists[i] > 0.0 {
                    taken[i] = true;
                    counts[assign[i]] -= 1;
                    assign[i] = c;
                    counts[c] = 1;
                    dists[i] = 0.0;
                    changed = true;
                }
            }
        }
        history.push(dists.iter().sum());

        if !changed || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let mut sums = Array2::<f64>::zeros((k, dim));
        for (i, &a) in assign.iter().enumerate() {
            let mut row = sums.row_mut(a);
            row += &data.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mut row = sums.row_mut(c);
                row /= counts[c] as f64;
                centroids.row_mut(c).assign(&row);
            }
        }
    }

    // Report the nearest-centroid partition of the final centroids.
    let assignments: Vec<usize> = (0..n).map(|i| nearest(&centroids, data.row(i)).0).collect();
    let inertia = inertia_of(&centroids, data, &assignments);
    LloydRun {
        centroids,
        assignments,
        inertia,
        history,
        iterations,
    }
}
