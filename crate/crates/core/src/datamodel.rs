//! Datasets, labels, split tags and regression bucketing.
//!
//! A dataset lives on disk as a JSON manifest pointing at a TMX feature
//! matrix, a label CSV (`row,label` or `row,y0[,y1]`) and a split CSV
//! (`row,split`). Relative paths are resolved against the manifest's
//! directory. Rows are identified by their 0-based position everywhere.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Categorical(Vec<usize>),
    /// One row per instance; 1 or 2 columns.
    Continuous(Array2<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Categorical(v) => v.len(),
            Labels::Continuous(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row indices of each split, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndex {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Labels,
    split: Vec<Split>,
    task: Task,
    n_classes: Option<usize>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Labels,
        split: Vec<Split>,
        task: Task,
        n_classes: Option<usize>,
    ) -> Result<Self> {
        let rows = features.nrows();
        if labels.len() != rows {
            return Err(Error::RowCountMismatch {
                what: "labels".into(),
                expected: rows,
                found: labels.len(),
            });
        }
        if split.len() != rows {
            return Err(Error::RowCountMismatch {
                what: "splits".into(),
                expected: rows,
                found: split.len(),
            });
        }
        match (&labels, task) {
            (Labels::Categorical(ids), Task::Classification) => {
                let n = n_classes.filter(|&n| n > 0).ok_or_else(|| {
                    Error::InvalidInput("classification requires a positive n_classes".into())
                })?;
                if let Some((row, &label)) = ids.iter().enumerate().find(|(_, &l)| l >= n) {
                    return Err(Error::LabelOutOfRange {
                        row,
                        label: label as i64,
                        n_classes: n,
                    });
                }
            }
            (Labels::Continuous(m), Task::Regression) => {
                if !(1..=2).contains(&m.ncols()) {
                    return Err(Error::InvalidInput(format!(
                        "regression labels must have 1 or 2 dimensions, found {}",
                        m.ncols()
                    )));
                }
            }
            _ => {
                return Err(Error::InvalidInput(
                    "label kind does not match the task".into(),
                ))
            }
        }
        if !split.contains(&Split::Train) {
            return Err(Error::InvalidInput("train split is empty".into()));
        }
        if !split.contains(&Split::Test) {
            return Err(Error::InvalidInput("test split is empty".into()));
        }
        let n_classes = match task {
            Task::Classification => n_classes,
            Task::Regression => None,
        };
        Ok(Dataset {
            features,
            labels,
            split,
            task,
            n_classes,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.n_classes
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn rows_in(&self, which: Split) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == which)
            .map(|(i, _)| i)
            .collect()
    }

    /// Train/valid/test rows. Without tagged validation rows, the last 10%
    /// of the training rows (rounded down) serve as validation.
    pub fn split_index(&self) -> SplitIndex {
        let mut train = self.rows_in(Split::Train);
        let mut valid = self.rows_in(Split::Valid);
        if valid.is_empty() {
            let carve = train.len() / 10;
            valid = train.split_off(train.len() - carve);
        }
        SplitIndex {
            train,
            valid,
            test: self.rows_in(Split::Test),
        }
    }

    /// Categorical view of the labels: class ids for classification, σ-bucket
    /// ids for regression. Returns the ids and the number of categories.
    pub fn categorical_labels(&self) -> Result<(Vec<usize>, usize)> {
        match &self.labels {
            Labels::Categorical(ids) => Ok((ids.clone(), self.n_classes.unwrap_or(0))),
            Labels::Continuous(m) => {
                let b = bucketize(m.view(), &self.split)?;
                Ok((b.ids, b.n_buckets))
            }
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Array2<f64> {
        self.features.select(ndarray::Axis(0), rows)
    }
}

/// σ-bucketing of continuous labels into (−∞,−σ), [−σ,+σ], (+σ,∞) per
/// dimension, combined as a base-3 number across dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketMap {
    /// Population standard deviation of the training labels, per dimension.
    pub sigma: Vec<f64>,
    pub ids: Vec<usize>,
    pub n_buckets: usize,
}

impl BucketMap {
    pub fn bucket_of(&self, y: &[f64]) -> usize {
        y.iter()
            .zip(&self.sigma)
            .rev()
            .fold(0, |acc, (&v, &s)| acc * 3 + bucket_1d(v, s))
    }
}

fn bucket_1d(v: f64, sigma: f64) -> usize {
    if v < -sigma {
        0
    } else if v <= sigma {
        1
    } else {
        2
    }
}

pub fn bucketize(labels: ArrayView2<'_, f64>, split: &[Split]) -> Result<BucketMap> {
    if labels.nrows() != split.len() {
        return Err(Error::RowCountMismatch {
            what: "splits".into(),
            expected: labels.nrows(),
            found: split.len(),
        });
    }
    let train: Vec<usize> = split
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == Split::Train)
        .map(|(i, _)| i)
        .collect();
    if train.is_empty() {
        return Err(Error::InvalidInput("no training labels to bucketize".into()));
    }
    let dims = labels.ncols();
    let mut sigma = Vec::with_capacity(dims);
    for d in 0..dims {
        let n = train.len() as f64;
        let mean = train.iter().map(|&r| labels[[r, d]]).sum::<f64>() / n;
        let var = train
            .iter()
            .map(|&r| (labels[[r, d]] - mean).powi(2))
            .sum::<f64>()
            / n;
        let s = var.sqrt();
        if !(s > 0.0) {
            return Err(Error::DegenerateLabels { dim: d });
        }
        sigma.push(s);
    }
    let mut map = BucketMap {
        sigma,
        ids: Vec::new(),
        n_buckets: 3usize.pow(dims as u32),
    };
    let ids = labels
        .rows()
        .into_iter()
        .map(|r| map.bucket_of(&r.to_vec()))
        .collect();
    map.ids = ids;
    Ok(map)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub features: String,
    pub labels: String,
    pub splits: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = io::read_to_string(manifest_path)?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: manifest_path.to_path_buf(),
            msg: e.to_string(),
        })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let features = io::read_tmx(&resolve(base, &manifest.features))?;
    let labels_path = resolve(base, &manifest.labels);
    let labels = read_labels(&labels_path, manifest.task, manifest.n_classes)?;
    let split = read_splits(&resolve(base, &manifest.splits))?;
    Dataset::new(features, labels, split, manifest.task, manifest.n_classes)
}

fn read_labels(path: &Path, task: Task, n_classes: Option<usize>) -> Result<Labels> {
    let table = CsvTable::read(path)?;
    let records = io::positional_records(&table, path)?;
    match task {
        Task::Classification => {
            if table.header != ["row", "label"] {
                return Err(Error::parse(path, 1, "expected header `row,label`"));
            }
            let n = n_classes.unwrap_or(0);
            records
                .iter()
                .enumerate()
                .map(|(row, rec)| {
                    let v: i64 = rec[0]
                        .parse()
                        .map_err(|_| Error::parse(path, row + 2, format!("bad label {:?}", rec[0])))?;
                    if v < 0 || v as usize >= n {
                        return Err(Error::LabelOutOfRange {
                            row,
                            label: v,
                            n_classes: n,
                        });
                    }
                    Ok(v as usize)
                })
                .collect::<Result<Vec<_>>>()
                .map(Labels::Categorical)
        }
        Task::Regression => {
            let dims = table.header.len() - 1;
            let expected: Vec<String> = std::iter::once("row".to_string())
                .chain((0..dims).map(|d| format!("y{d}")))
                .collect();
            if !(1..=2).contains(&dims) || table.header != expected {
                return Err(Error::parse(path, 1, "expected header `row,y0[,y1]`"));
            }
            let mut data = Vec::with_capacity(records.len() * dims);
            for (row, rec) in records.iter().enumerate() {
                for tok in rec {
                    data.push(
                        tok.parse::<f64>()
                            .map_err(|_| Error::parse(path, row + 2, format!("bad value {tok:?}")))?,
                    );
                }
            }
            Array2::from_shape_vec((records.len(), dims), data)
                .map(Labels::Continuous)
                .map_err(|e| Error::parse(path, 1, e.to_string()))
        }
    }
}

fn read_splits(path: &Path) -> Result<Vec<Split>> {
    let table = CsvTable::read(path)?;
    if table.header != ["row", "split"] {
        return Err(Error::parse(path, 1, "expected header `row,split`"));
    }
    io::positional_records(&table, path)?
        .into_iter()
        .enumerate()
        .map(|(row, rec)| {
            rec[0].parse().map_err(|_| Error::UnknownSplit {
                row,
                tag: rec[0].clone(),
            })
        })
        .collect()
}

/// Writes `features.tmx`, `labels.csv`, `splits.csv` and `manifest.json`
/// into `dir`; returns the manifest path.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    io::write_tmx(&dir.join("features.tmx"), &dataset.features)?;

    let labels = match &dataset.labels {
        Labels::Categorical(ids) => {
            let mut t = CsvTable::new(["row", "label"]);
            for (i, l) in ids.iter().enumerate() {
                t.push([i, *l]);
            }
            t
        }
        Labels::Continuous(m) => {
            let mut header = vec!["row".to_string()];
            header.extend((0..m.ncols()).map(|d| format!("y{d}")));
            let mut t = CsvTable::new(header);
            for (i, r) in m.rows().into_iter().enumerate() {
                let mut rec = vec![i.to_string()];
                rec.extend(r.iter().map(|v| v.to_string()));
                t.push(rec);
            }
            t
        }
    };
    labels.write(&dir.join("labels.csv"))?;

    let mut splits = CsvTable::new(["row", "split"]);
    for (i, s) in dataset.split.iter().enumerate() {
        splits.push([i.to_string(), s.to_string()]);
    }
    splits.write(&dir.join("splits.csv"))?;

    let manifest = DatasetManifest {
        features: "features.tmx".into(),
        labels: "labels.csv".into(),
        splits: "splits.csv".into(),
        task: dataset.task,
        n_classes: dataset.n_classes,
    };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    json.push('\n');
    io::write_atomic(&path, json.as_bytes())?;
    Ok(path)
}
