//! Partitioning embedded rows into map regions.

mod birch;
mod kmeans;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub use birch::{birch_fit, BirchParams};
pub use kmeans::{kmeans_fit, lloyd, KMeansParams, LloydRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    Kmeans,
    Birch,
}

impl ClusterMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterMethod::Kmeans => "kmeans",
            ClusterMethod::Birch => "birch",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(ClusterMethod::Kmeans),
            "birch" => Ok(ClusterMethod::Birch),
            other => Err(Error::InvalidInput(format!("unknown clustering {other:?}"))),
        }
    }
}

/// Algorithm choice plus its parameters, without `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClusterSpec {
    Kmeans {
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    Birch {
        #[serde(default = "default_branching")]
        branching: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
}

fn default_restarts() -> usize {
    10
}

fn default_branching() -> usize {
    50
}

impl ClusterSpec {
    pub fn method(&self) -> ClusterMethod {
        match self {
            ClusterSpec::Kmeans { .. } => ClusterMethod::Kmeans,
            ClusterSpec::Birch { .. } => ClusterMethod::Birch,
        }
    }

    /// Short canonical form without `k`, e.g. `kmeans(r=10)`.
    pub fn canonical(&self) -> String {
        match self {
            ClusterSpec::Kmeans { restarts } => format!("kmeans(r={restarts})"),
            ClusterSpec::Birch {
                branching,
                threshold: Some(t),
            } => format!("birch(b={branching},t={t})"),
            ClusterSpec::Birch {
                branching,
                threshold: None,
            } => format!("birch(b={branching},t=auto)"),
        }
    }

    pub fn fit(&self, data: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<ClusterModel> {
        match *self {
            ClusterSpec::Kmeans { restarts } => kmeans_fit(
                data,
                KMeansParams {
                    k,
                    seed,
                    restarts,
                    ..KMeansParams::default()
                },
            ),
            ClusterSpec::Birch {
                branching,
                threshold,
            } => birch_fit(
                data,
                BirchParams {
                    k,
                    branching,
                    threshold,
                },
            ),
        }
    }
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec::Kmeans {
            restarts: default_restarts(),
        }
    }
}

/// A fitted clustering: `k` centroids plus the cluster id of every row it
/// was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub method: ClusterMethod,
    pub k: usize,
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub seed: u64,
    /// Total squared distance of rows to their assigned centroid.
    pub inertia: f64,
    /// `empty[c]` is set when no fitted row ended up in cluster `c`.
    pub empty: Vec<bool>,
}

impl ClusterModel {
    pub(crate) fn from_centroids(
        method: ClusterMethod,
        centroids: Array2<f64>,
        data: ArrayView2<'_, f64>,
        seed: u64,
    ) -> Self {
        let k = centroids.nrows();
        let assignments = nearest_all(&centroids, data);
        let inertia = inertia_of(&centroids, data, &assignments);
        let empty = empty_flags(k, &assignments);
        ClusterModel {
            method,
            k,
            centroids,
            assignments,
            seed,
            inertia,
            empty,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.centroids.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; exact ties go to the lowest id.
pub(crate) fn nearest(centroids: &Array2<f64>, x: ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(row, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub(crate) fn nearest_all(centroids: &Array2<f64>, data: ArrayView2<'_, f64>) -> Vec<usize> {
    data.rows()
        .into_iter()
        .map(|r| nearest(centroids, r).0)
        .collect()
}

pub(crate) fn inertia_of(centroids: &Array2<f64>, data: ArrayView2<'_, f64>, assign: &[usize]) -> f64 {
    data.rows()
        .into_iter()
        .zip(assign)
        .map(|(r, &c)| sq_dist(r, centroids.row(c)))
        .sum()
}

pub(crate) fn empty_flags(k: usize, assign: &[usize]) -> Vec<bool> {
    let mut empty = vec![true; k];
    for &a in assign {
        empty[a] = false;
    }
    empty
}

/// Nearest-centroid cluster id for every row of `data`.
pub fn assign(model: &ClusterModel, data: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if data.ncols() != model.out_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.out_dim(),
            found: data.ncols(),
        });
    }
    Ok(nearest_all(&model.centroids, data))
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    method: ClusterMethod,
    k: usize,
    out_dim: usize,
    seed: u64,
    inertia: f64,
    empty: Vec<usize>,
    centroids: String,
    assignments: String,
}

/// Persists as `manifest.json`, `centroids.tmx` and `assignments.csv`
/// (`row,cluster`) inside `dir`.
pub fn save_model(model: &ClusterModel, dir: &Path) -> Result<()> {
    let manifest = ModelManifest {
        method: model.method,
        k: model.k,
        out_dim: model.out_dim(),
        seed: model.seed,
        inertia: model.inertia,
        empty: (0..model.k).filter(|&c| model.empty[c]).collect(),
        centroids: "centroids.tmx".into(),
        assignments: "assignments.csv".into(),
    };
    io::write_tmx(&dir.join(&manifest.centroids), &model.centroids)?;
    io::write_id_column(&dir.join(&manifest.assignments), "cluster", &model.assignments)?;
    let mut json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    json.push('\n');
    io::write_atomic(&dir.join("manifest.json"), json.as_bytes())
}

pub fn load_model(dir: &Path) -> Result<ClusterModel> {
    let path = dir.join("manifest.json");
    let m: ModelManifest =
        serde_json::from_str(&io::read_to_string(&path)?).map_err(|e| Error::Manifest {
            path: path.clone(),
            msg: e.to_string(),
        })?;
    let centroids = io::read_tmx(&dir.join(&m.centroids))?;
    let assignments = io::read_id_column(&dir.join(&m.assignments))?;
    if centroids.nrows() != m.k || centroids.ncols() != m.out_dim {
        return Err(Error::Manifest {
            path,
            msg: "centroid shape disagrees with the manifest".into(),
        });
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= m.k) {
        return Err(Error::Manifest {
            path,
            msg: format!("assignment {bad} out of range for k = {}", m.k),
        });
    }
    let mut empty = vec![false; m.k];
    for c in m.empty {
        if c < m.k {
            empty[c] = true;
        }
    }
    Ok(ClusterModel {
        method: m.method,
        k: m.k,
        centroids,
        assignments,
        seed: m.seed,
        inertia: m.inertia,
        empty,
    })
}
