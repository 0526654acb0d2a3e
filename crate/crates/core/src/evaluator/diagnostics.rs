//! Internal cluster-validity indices. Reported alongside the pairwise scores
//! but never used for selection.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// `None` where an index is undefined: fewer than two non-empty clusters,
/// too few rows, or a non-finite value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub silhouette: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub calinski_harabasz: Option<f64>,
}

pub fn diagnostics(data: ArrayView2<'_, f64>, labels: &[usize]) -> Diagnostics {
    // a degenerate geometry (coincident centroids, zero scatter) reads as
    // undefined rather than infinite
    let finite = |v: Option<f64>| v.filter(|x| x.is_finite());
    Diagnostics {
        silhouette: finite(silhouette(data, labels)),
        davies_bouldin: finite(davies_bouldin(data, labels)),
        calinski_harabasz: finite(calinski_harabasz(data, labels)),
    }
}

fn dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Compacted label ids, cluster sizes and centroids of the non-empty clusters.
fn groups(data: ArrayView2<'_, f64>, labels: &[usize]) -> (Vec<usize>, Vec<usize>, Array2<f64>) {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let compact: Vec<usize> = labels
        .iter()
        .map(|l| ids.binary_search(l).expect("present"))
        .collect();
    let k = ids.len();
    let mut sizes = vec![0; k];
    let mut cent = Array2::zeros((k, data.ncols()));
    for (i, &c) in compact.iter().enumerate() {
        sizes[c] += 1;
        let mut row = cent.row_mut(c);
        row += &data.row(i);
    }
    for c in 0..k {
        let mut row = cent.row_mut(c);
        row /= sizes[c] as f64;
    }
    (compact, sizes, cent)
}

/// Mean silhouette over all rows; members of singleton clusters score 0.
pub fn silhouette(data: ArrayView2<'_, f64>, labels: &[usize]) -> Option<f64> {
    let (lab, sizes, _) = groups(data, labels);
    let k = sizes.len();
    let n = lab.len();
    if k < 2 || k >= n {
        return None;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[lab[j]] += dist(data.row(i), data.row(j));
            }
        }
        let own = lab[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / n as f64)
}

pub fn davies_bouldin(data: ArrayView2<'_, f64>, labels: &[usize]) -> Option<f64> {
    let (lab, sizes, cent) = groups(data, labels);
    let k = sizes.len();
    if k < 2 {
        return None;
    }
    let mut scatter = vec![0.0; k];
    for (i, &c) in lab.iter().enumerate() {
        scatter[c] += dist(data.row(i), cent.row(c));
    }
    for c in 0..k {
        scatter[c] /= sizes[c] as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = dist(cent.row(i), cent.row(j));
            let r = if d > 0.0 {
                (scatter[i] + scatter[j]) / d
            } else if scatter[i] + scatter[j] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(r);
        }
        total += worst;
    }
    Some(total / k as f64)
}

pub fn calinski_harabasz(data: ArrayView2<'_, f64>, labels: &[usize]) -> Option<f64> {
    let (lab, sizes, cent) = groups(data, labels);
    let k = sizes.len();
    let n = lab.len();
    if k < 2 || n <= k {
        return None;
    }
    let mean = data.mean_axis(ndarray::Axis(0))?;
    let between: f64 = (0..k)
        .map(|c| sizes[c] as f64 * dist(cent.row(c), mean.view()).powi(2))
        .sum();
    let within: f64 = lab
        .iter()
        .enumerate()
        .map(|(i, &c)| dist(data.row(i), cent.row(c)).powi(2))
        .sum();
    if within == 0.0 {
        return Some(f64::INFINITY);
    }
    Some(between * (n - k) as f64 / (within * (k - 1) as f64))
}
