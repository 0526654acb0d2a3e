//! Dimensionality reduction: linear projections (PCA, SVD, LDA), exact
//! t-SNE, and import of embeddings computed by external tools.

mod linear;
mod tsne;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::io;

pub use linear::fit_linear;
pub use tsne::{fit_tsne, kl_divergence, joint_probabilities, TsneFit, TsneParams};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMethod {
    Pca,
    Svd,
    Lda,
    Tsne,
    External,
}

impl EmbeddingMethod {
    pub fn is_linear(self) -> bool {
        matches!(self, Self::Pca | Self::Svd | Self::Lda)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pca => "pca",
            Self::Svd => "svd",
            Self::Lda => "lda",
            Self::Tsne => "tsne",
            Self::External => "external",
        }
    }
}

impl fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pca" => Self::Pca,
            "svd" => Self::Svd,
            "lda" => Self::Lda,
            "tsne" => Self::Tsne,
            "external" => Self::External,
            other => return Err(Error::InvalidInput(format!("unknown embedding {other:?}"))),
        })
    }
}

/// A fitted projection. For linear methods `components` holds one
/// orthonormal row per output dimension and `center` the vector subtracted
/// before projecting (zero for SVD). Non-linear methods carry no components.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub method: EmbeddingMethod,
    pub components: Array2<f64>,
    pub center: Array1<f64>,
    pub out_dim: usize,
    pub explained_variance_ratio: Vec<f64>,
    /// Set when no component subset reached the variance target; all
    /// nonzero components are kept in that case.
    pub target_unreached: bool,
}

impl EmbeddingModel {
    pub fn raw_dim(&self) -> usize {
        self.components.ncols()
    }

    /// Maps embedded rows back into the raw space.
    pub fn inverse_transform(&self, embedded: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if !self.method.is_linear() {
            return Err(Error::InvalidInput(format!(
                "{} has no inverse transform",
                self.method
            )));
        }
        if embedded.ncols() != self.out_dim {
            return Err(Error::DimensionMismatch {
                expected: self.out_dim,
                found: embedded.ncols(),
            });
        }
        Ok(embedded.dot(&self.components) + &self.center)
    }
}

/// Embedded rows, aligned with the dataset rows they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSet {
    pub matrix: Array2<f64>,
}

impl EmbeddedSet {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        check_finite(&matrix)?;
        Ok(EmbeddedSet { matrix })
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> Array2<f64> {
        self.matrix.select(Axis(0), idx)
    }
}

fn check_finite(m: &Array2<f64>) -> Result<()> {
    for ((row, col), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Projects raw rows through a fitted linear model: `(rows − center)·Cᵀ`.
pub fn transform(model: &EmbeddingModel, rows: ArrayView2<'_, f64>) -> Result<EmbeddedSet> {
    if !model.method.is_linear() {
        return Err(Error::InvalidInput(format!(
            "{} embeddings have no out-of-sample transform",
            model.method
        )));
    }
    if rows.ncols() != model.raw_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.raw_dim(),
            found: rows.ncols(),
        });
    }
    let centered = &rows - &model.center;
    EmbeddedSet::new(centered.dot(&model.components.t()))
}

/// Loads an externally computed embedding (UMAP, Isomap, autoencoder codes,
/// word vectors, ...) stored as TMX, one row per dataset row.
pub fn import_embedding(path: &Path, dataset: &Dataset) -> Result<EmbeddedSet> {
    let m = io::read_tmx(path)?;
    if m.nrows() != dataset.n_rows() {
        return Err(Error::RowMismatch {
            expected: dataset.n_rows(),
            found: m.nrows(),
        });
    }
    if m.ncols() == 0 {
        return Err(Error::InvalidInput("embedding has no columns".into()));
    }
    EmbeddedSet::new(m)
}

pub fn export_embedding(path: &Path, set: &EmbeddedSet) -> Result<()> {
    io::write_tmx(path, &set.matrix)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    method: EmbeddingMethod,
    out_dim: usize,
    raw_dim: usize,
    explained_variance_ratio: Vec<f64>,
    target_unreached: bool,
    components: String,
    center: String,
}

/// Persists a model as `manifest.json`, `components.tmx` and `center.tmx`
/// inside `dir`.
pub fn save_model(model: &EmbeddingModel, dir: &Path) -> Result<()> {
    let manifest = ModelManifest {
        method: model.method,
        out_dim: model.out_dim,
        raw_dim: model.raw_dim(),
        explained_variance_ratio: model.explained_variance_ratio.clone(),
        target_unreached: model.target_unreached,
        components: "components.tmx".into(),
        center: "center.tmx".into(),
    };
    io::write_tmx(&dir.join(&manifest.components), &model.components)?;
    let center = model.center.clone().insert_axis(Axis(0));
    io::write_tmx(&dir.join(&manifest.center), &center)?;
    let mut json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    json.push('\n');
    io::write_atomic(&dir.join("manifest.json"), json.as_bytes())
}

pub fn load_model(dir: &Path) -> Result<EmbeddingModel> {
    let path = dir.join("manifest.json");
    let manifest: ModelManifest =
        serde_json::from_str(&io::read_to_string(&path)?).map_err(|e| Error::Manifest {
            path: path.clone(),
            msg: e.to_string(),
        })?;
    let components = io::read_tmx(&dir.join(&manifest.components))?;
    let center = io::read_tmx(&dir.join(&manifest.center))?;
    if components.nrows() != manifest.out_dim
        || components.ncols() != manifest.raw_dim
        || center.nrows() != 1
        || center.ncols() != manifest.raw_dim
    {
        return Err(Error::Manifest {
            path,
            msg: "component/center shapes disagree with the manifest".into(),
        });
    }
    Ok(EmbeddingModel {
        method: manifest.method,
        components,
        center: center.row(0).to_owned(),
        out_dim: manifest.out_dim,
        explained_variance_ratio: manifest.explained_variance_ratio,
        target_unreached: manifest.target_unreached,
    })
}

/// How to embed a dataset, as written in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingSpec {
    Pca {
        #[serde(default = "default_variance")]
        variance_target: f64,
    },
    Svd {
        #[serde(default = "default_variance")]
        variance_target: f64,
    },
    Lda {
        #[serde(default = "default_variance")]
        variance_target: f64,
    },
    Tsne {
        #[serde(default = "default_tsne_dim")]
        out_dim: usize,
        #[serde(default = "default_perplexity")]
        perplexity: f64,
        #[serde(default = "default_tsne_iterations")]
        iterations: usize,
    },
    External { path: PathBuf },
}

fn default_variance() -> f64 {
    DEFAULT_VARIANCE_TARGET
}

fn default_tsne_dim() -> usize {
    TsneParams::default().out_dim
}

fn default_perplexity() -> f64 {
    TsneParams::default().perplexity
}

fn default_tsne_iterations() -> usize {
    TsneParams::default().iterations
}

impl EmbeddingSpec {
    pub fn method(&self) -> EmbeddingMethod {
        match self {
            EmbeddingSpec::Pca { .. } => EmbeddingMethod::Pca,
            EmbeddingSpec::Svd { .. } => EmbeddingMethod::Svd,
            EmbeddingSpec::Lda { .. } => EmbeddingMethod::Lda,
            EmbeddingSpec::Tsne { .. } => EmbeddingMethod::Tsne,
            EmbeddingSpec::External { .. } => EmbeddingMethod::External,
        }
    }

    /// Short canonical form, e.g. `pca(v=0.9)`.
    pub fn canonical(&self) -> String {
        match self {
            EmbeddingSpec::Pca { variance_target: v }
            | EmbeddingSpec::Svd { variance_target: v }
            | EmbeddingSpec::Lda { variance_target: v } => format!("{}(v={v})", self.method()),
            EmbeddingSpec::Tsne {
                out_dim,
                perplexity,
                iterations,
            } => format!("tsne(d={out_dim},p={perplexity},it={iterations})"),
            EmbeddingSpec::External { path } => format!("external({})", path.display()),
        }
    }

    /// Embeds every dataset row. Linear methods also return their model.
    /// Relative external paths resolve against the working directory.
    pub fn embed(&self, dataset: &Dataset, seed: u64) -> Result<(EmbeddedSet, Option<EmbeddingModel>)> {
        match self {
            EmbeddingSpec::Pca { variance_target }
            | EmbeddingSpec::Svd { variance_target }
            | EmbeddingSpec::Lda { variance_target } => {
                let model = fit_linear(dataset, self.method(), *variance_target)?;
                let set = transform(&model, dataset.features().view())?;
                Ok((set, Some(model)))
            }
            EmbeddingSpec::Tsne {
                out_dim,
                perplexity,
                iterations,
            } => {
                let params = TsneParams {
                    out_dim: *out_dim,
                    perplexity: *perplexity,
                    iterations: *iterations,
                    seed,
                };
                Ok((fit_tsne(dataset.features().view(), params)?.embedding, None))
            }
            EmbeddingSpec::External { path } => Ok((import_embedding(path, dataset)?, None)),
        }
    }
}
