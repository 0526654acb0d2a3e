//! Declarative run configuration. Relative paths are resolved against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topomap::clustering::ClusterSpec;
use topomap::embedding::EmbeddingSpec;
use topomap::evaluator::{ClassifierSpec, ClusteringConfiguration};
use topomap::mutation::DEFAULT_BASELINE_REPEATS;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub seed: u64,
    #[serde(default)]
    pub candidates: Vec<CandidateConfig>,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub mutation: Option<MutationConfig>,
}

/// A candidate as written in the file; the seed defaults to the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub embedding: EmbeddingSpec,
    pub clustering: ClusterSpec,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationConfig {
    /// Prediction file of the original model.
    pub original: PathBuf,
    /// CSV `mutant_id,operator,configuration,predictions_path`.
    pub mutants: PathBuf,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_repeats")]
    pub baseline_repeats: usize,
}

fn default_repeats() -> usize {
    DEFAULT_BASELINE_REPEATS
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn must_exist(p: &Path, what: &str) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{what} {} does not exist", p.display())))
    }
}

impl RunConfig {
    /// Reads the file and resolves every path in it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset = resolve(base, &cfg.dataset);
        cfg.output = cfg.output.map(|o| resolve(base, &o));
        for c in &mut cfg.candidates {
            if let EmbeddingSpec::External { path } = &mut c.embedding {
                *path = resolve(base, path);
            }
        }
        if let Some(m) = &mut cfg.mutation {
            m.original = resolve(base, &m.original);
            m.mutants = resolve(base, &m.mutants);
        }
        Ok(cfg)
    }

    /// Checks that every referenced input exists and the parameters are
    /// usable. Mutant prediction files are checked per mutant later.
    pub fn validate(&self) -> Result<(), CliError> {
        must_exist(&self.dataset, "dataset manifest")?;
        for (i, c) in self.candidates.iter().enumerate() {
            if let EmbeddingSpec::External { path } = &c.embedding {
                must_exist(path, &format!("candidate {i} embedding"))?;
            }
            if c.k == Some(0) {
                return Err(CliError::Validation(format!("candidate {i}: k must be positive")));
            }
        }
        if let Some(m) = &self.mutation {
            must_exist(&m.original, "original predictions")?;
            must_exist(&m.mutants, "mutant manifest")?;
            if m.baseline_repeats == 0 {
                return Err(CliError::Validation("baseline_repeats must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn configurations(&self) -> Vec<ClusteringConfiguration> {
        self.candidates
            .iter()
            .map(|c| ClusteringConfiguration {
                embedding: c.embedding.clone(),
                clustering: c.clustering,
                k: c.k,
                seed: c.seed.unwrap_or(self.seed),
            })
            .collect()
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> Result<PathBuf, CliError> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.clone())
            .ok_or_else(|| CliError::Validation("no output directory: set `output` or pass --out".into()))
    }
}
