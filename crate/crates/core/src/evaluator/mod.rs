//! Scoring candidate maps: a classifier learns to predict each row's cluster
//! from the raw features, and a map is only as good as the cluster pair that
//! classifier confuses most.

mod classifier;
mod diagnostics;
mod pairwise;

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{assign, ClusterModel, ClusterSpec};
use crate::datamodel::Dataset;
use crate::embedding::{EmbeddedSet, EmbeddingModel, EmbeddingSpec};
use crate::error::{Error, Result};
use crate::io::{self, CsvTable};
use crate::kselect::{select_k, KSelectionTrace};

pub use classifier::{
    class_weights, fit_mlp, train_classifier, Activation, ClassifierModel, ClassifierSpec,
    EpochLoss,
};
pub use diagnostics::{calinski_harabasz, davies_bouldin, diagnostics, silhouette, Diagnostics};
pub use pairwise::{
    mean_of_matrix, min_of_matrix, min_pairwise_accuracy, pairwise_matrix,
    weighted_pairwise_accuracy, MinPair, PairCounts,
};

/// One candidate map: how to embed, how to cluster, and with how many
/// clusters. `k = None` lets the k-selection loop choose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfiguration {
    pub embedding: EmbeddingSpec,
    pub clustering: ClusterSpec,
    #[serde(default)]
    pub k: Option<usize>,
    pub seed: u64,
}

impl ClusteringConfiguration {
    pub fn id(&self) -> String {
        let k = self.k.map_or_else(|| "auto".to_string(), |k| k.to_string());
        format!(
            "{}+{}:k={k}:seed={}",
            self.embedding.canonical(),
            self.clustering.canonical(),
            self.seed
        )
    }
}

/// Outcome of evaluating one candidate. Failed candidates keep their id and
/// error message; every score is then absent.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub index: usize,
    pub config_id: String,
    pub embedding: String,
    pub clustering: String,
    pub k: Option<usize>,
    pub out_dim: Option<usize>,
    pub error: Option<String>,
    /// Symmetric, NaN on the diagonal and for undefined pairs.
    pub pairwise: Option<Array2<f64>>,
    pub min_pair: Option<MinPair>,
    pub overall_weighted_accuracy: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl EvaluationReport {
    fn failed(index: usize, config: &ClusteringConfiguration, k: Option<usize>, err: &Error) -> Self {
        EvaluationReport {
            index,
            config_id: config.id(),
            embedding: config.embedding.method().to_string(),
            clustering: config.clustering.method().to_string(),
            k,
            out_dim: None,
            error: Some(err.to_string()),
            pairwise: None,
            min_pair: None,
            overall_weighted_accuracy: None,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn min_acc(&self) -> Option<f64> {
        self.min_pair.map(|p| p.value)
    }
}

/// Everything a successful evaluation produced, kept so the winner can be
/// persisted as the map without recomputation.
#[derive(Debug, Clone)]
pub struct CandidateMap {
    pub embedded: EmbeddedSet,
    pub embedding_model: Option<EmbeddingModel>,
    /// Fitted on the training rows of the embedding.
    pub cluster: ClusterModel,
    /// Cluster of every dataset row.
    pub assignments: Vec<usize>,
    pub trace: Option<KSelectionTrace>,
    pub classifier: ClassifierModel,
    pub test_predictions: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub map: Option<CandidateMap>,
}

/// Embeds, clusters the training rows, pseudo-labels every row by nearest
/// centroid, trains the classifier on the raw features and scores its test
/// predictions pair by pair. The configuration seed drives every random
/// step, including the classifier.
pub fn evaluate_candidate(
    index: usize,
    config: &ClusteringConfiguration,
    dataset: &Dataset,
    classifier: &ClassifierSpec,
) -> Evaluation {
    let mut k = config.k;
    match run_candidate(config, dataset, classifier, &mut k) {
        Ok((report, map)) => Evaluation {
            report: EvaluationReport { index, ..report },
            map: Some(map),
        },
        Err(e) => {
            log::warn!("candidate {index} ({}) failed: {e}", config.id());
            Evaluation {
                report: EvaluationReport::failed(index, config, k, &e),
                map: None,
            }
        }
    }
}

fn run_candidate(
    config: &ClusteringConfiguration,
    dataset: &Dataset,
    spec: &ClassifierSpec,
    k_out: &mut Option<usize>,
) -> Result<(EvaluationReport, CandidateMap)> {
    let idx = dataset.split_index();
    if idx.train.is_empty() || idx.test.is_empty() {
        return Err(Error::InvalidInput(
            "evaluation needs training and test rows".into(),
        ));
    }
    let (embedded, embedding_model) = config.embedding.embed(dataset, config.seed)?;
    let e_train = embedded.rows(&idx.train);

    let (k, trace) = match config.k {
        Some(k) => (k, None),
        None => {
            let (labels, n_classes) = dataset.categorical_labels()?;
            let pick = |rows: &[usize]| rows.iter().map(|&r| labels[r]).collect::<Vec<_>>();
            let trace = select_k(
                e_train.view(),
                embedded.rows(&idx.test).view(),
                &pick(&idx.train),
                &pick(&idx.test),
                n_classes,
                &config.clustering,
                config.seed,
            )?;
            (trace.k_star, Some(trace))
        }
    };
    *k_out = Some(k);

    let cluster = config.clustering.fit(e_train.view(), k, config.seed)?;
    let assignments = assign(&cluster, embedded.matrix.view())?;

    let spec = ClassifierSpec {
        seed: config.seed,
        ..spec.clone()
    };
    let model = train_classifier(dataset, &assignments, &spec)?;
    let predictions = model.predict(dataset.select_rows(&idx.test).view())?;
    let truth: Vec<usize> = idx.test.iter().map(|&r| assignments[r]).collect();

    let pairwise = pairwise_matrix(&predictions, &truth, k)?;
    let min_pair = min_of_matrix(&pairwise)
        .ok_or_else(|| Error::Infeasible("no cluster pair has test rows".into()))?;
    let report = EvaluationReport {
        index: 0,
        config_id: config.id(),
        embedding: config.embedding.method().to_string(),
        clustering: config.clustering.method().to_string(),
        k: Some(k),
        out_dim: Some(embedded.out_dim()),
        error: None,
        overall_weighted_accuracy: mean_of_matrix(&pairwise),
        pairwise: Some(pairwise),
        min_pair: Some(min_pair),
        diagnostics: diagnostics(e_train.view(), &cluster.assignments),
    };
    let map = CandidateMap {
        embedded,
        embedding_model,
        cluster,
        assignments,
        trace,
        classifier: model,
        test_predictions: predictions,
    };
    Ok((report, map))
}

#[derive(Debug, Clone)]
pub struct Selection {
    /// Position of the winner in the candidate list; `None` when every
    /// candidate failed.
    pub best: Option<usize>,
    pub evaluations: Vec<Evaluation>,
}

/// Evaluates every candidate (in parallel on the current rayon pool) and
/// picks the highest minimum pairwise accuracy; ties go to the earlier
/// candidate.
pub fn select_configuration(
    candidates: &[ClusteringConfiguration],
    dataset: &Dataset,
    classifier: &ClassifierSpec,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate configurations".into()));
    }
    let evaluations: Vec<Evaluation> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| evaluate_candidate(i, c, dataset, classifier))
        .collect();
    let reports: Vec<&EvaluationReport> = evaluations.iter().map(|e| &e.report).collect();
    Ok(Selection {
        best: best_of(reports.iter().copied()),
        evaluations,
    })
}

pub fn best_of<'a>(reports: impl IntoIterator<Item = &'a EvaluationReport>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for r in reports {
        if let Some(v) = r.min_acc() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((r.index, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportManifest {
    index: usize,
    config_id: String,
    embedding: String,
    clustering: String,
    k: Option<usize>,
    out_dim: Option<usize>,
    error: Option<String>,
    pairwise: Option<String>,
    min_pair: Option<(usize, usize, f64)>,
    overall_weighted_accuracy: Option<f64>,
    diagnostics: Diagnostics,
}

/// Writes `report.json` and, for successful candidates, `pairwise.tmx`.
pub fn save_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    let manifest = ReportManifest {
        index: report.index,
        config_id: report.config_id.clone(),
        embedding: report.embedding.clone(),
        clustering: report.clustering.clone(),
        k: report.k,
        out_dim: report.out_dim,
        error: report.error.clone(),
        pairwise: report.pairwise.as_ref().map(|_| "pairwise.tmx".to_string()),
        min_pair: report.min_pair.map(|p| (p.a, p.b, p.value)),
        overall_weighted_accuracy: report.overall_weighted_accuracy,
        diagnostics: report.diagnostics,
    };
    if let Some(m) = &report.pairwise {
        io::write_tmx(&dir.join("pairwise.tmx"), m)?;
    }
    let mut json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    json.push('\n');
    io::write_atomic(&dir.join("report.json"), json.as_bytes())
}

pub fn load_report(dir: &Path) -> Result<EvaluationReport> {
    let path = dir.join("report.json");
    let m: ReportManifest =
        serde_json::from_str(&io::read_to_string(&path)?).map_err(|e| Error::Manifest {
            path: path.clone(),
            msg: e.to_string(),
        })?;
    let pairwise = match &m.pairwise {
        Some(name) => Some(io::read_tmx(&dir.join(name))?),
        None => None,
    };
    Ok(EvaluationReport {
        index: m.index,
        config_id: m.config_id,
        embedding: m.embedding,
        clustering: m.clustering,
        k: m.k,
        out_dim: m.out_dim,
        error: m.error,
        pairwise,
        min_pair: m.min_pair.map(|(a, b, value)| MinPair { a, b, value }),
        overall_weighted_accuracy: m.overall_weighted_accuracy,
        diagnostics: m.diagnostics,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Ranking of all candidates by minimum pairwise accuracy (descending,
/// earlier candidate first on ties); failed candidates trail in input order.
pub fn summary_table(reports: &[EvaluationReport]) -> CsvTable {
    let mut order: Vec<&EvaluationReport> = reports.iter().collect();
    order.sort_by(|a, b| match (a.min_acc(), b.min_acc()) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    let mut t = CsvTable::new([
        "rank",
        "candidate",
        "config",
        "embedding",
        "clustering",
        "k",
        "min_pair_a",
        "min_pair_b",
        "min_acc",
        "overall_w_acc",
        "silhouette",
        "davies_bouldin",
        "calinski_harabasz",
        "status",
    ]);
    for (rank, r) in order.into_iter().enumerate() {
        t.push([
            (rank + 1).to_string(),
            r.index.to_string(),
            r.config_id.replace(',', ";"),
            r.embedding.clone(),
            r.clustering.clone(),
            opt(r.k),
            opt(r.min_pair.map(|p| p.a)),
            opt(r.min_pair.map(|p| p.b)),
            opt(r.min_acc()),
            opt(r.overall_weighted_accuracy),
            opt(r.diagnostics.silhouette),
            opt(r.diagnostics.davies_bouldin),
            opt(r.diagnostics.calinski_harabasz),
            if r.is_ok() { "ok" } else { "failed" }.to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Labels, Split, Task};
    use crate::embedding::export_embedding;
    use crate::synthetic::{nested_blobs, uniform_noise};

    fn config(embedding: EmbeddingSpec, k: Option<usize>) -> ClusteringConfiguration {
        ClusteringConfiguration {
            embedding,
            clustering: ClusterSpec::default(),
            k,
            seed: 3,
        }
    }

    fn pca() -> EmbeddingSpec {
        EmbeddingSpec::Pca { variance_target: 0.9 }
    }

    fn quick() -> ClassifierSpec {
        ClassifierSpec {
            hidden_layers: vec![32],
            epochs: 30,
            ..Default::default()
        }
    }

    #[test]
    fn ids_are_canonical_and_distinct() {
        let a = config(pca(), Some(4));
        let b = config(pca(), None);
        assert_eq!(a.id(), "pca(v=0.9)+kmeans(r=10):k=4:seed=3");
        assert_ne!(a.id(), b.id());
        let json = serde_json::to_string(&a).unwrap();
        let back: ClusteringConfiguration = serde_json::from_str(&json).unwrap();
        assert_eq!(back.id(), a.id());
    }

    #[test]
    fn single_candidate_is_returned() {
        let d = nested_blobs(3, 1, 240, 3, 1).to_dataset().unwrap();
        let sel = select_configuration(&[config(pca(), Some(3))], &d, &quick()).unwrap();
        assert_eq!(sel.best, Some(0));
        let r = &sel.evaluations[0].report;
        assert!(r.is_ok(), "{:?}", r.error);
        assert!(r.min_acc().unwrap() > 0.95);
        let m = r.pairwise.as_ref().unwrap();
        for a in 0..3 {
            assert!(m[[a, a]].is_nan());
            for b in 0..3 {
                if a != b {
                    assert_eq!(m[[a, b]].to_bits(), m[[b, a]].to_bits());
                }
            }
        }
    }

    #[test]
    fn separated_blobs_beat_a_random_embedding() {
        let fixture = nested_blobs(4, 1, 320, 4, 2);
        let d = fixture.to_dataset().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let noise = dir.path().join("noise.tmx");
        export_embedding(&noise, &EmbeddedSet::new(uniform_noise(320, 2, 9)).unwrap()).unwrap();
        let candidates = [
            config(EmbeddingSpec::External { path: noise }, Some(4)),
            config(pca(), Some(4)),
        ];
        let sel = select_configuration(&candidates, &d, &quick()).unwrap();
        let acc: Vec<f64> = sel.evaluations.iter().map(|e| e.report.min_acc().unwrap()).collect();
        assert_eq!(sel.best, Some(1));
        assert!(acc[1] > acc[0], "{acc:?}");
    }

    #[test]
    fn failing_candidate_is_recorded_not_fatal() {
        let d = nested_blobs(2, 1, 100, 2, 4).to_dataset().unwrap();
        let sel = select_configuration(
            &[config(pca(), Some(1000)), config(pca(), Some(2))],
            &d,
            &quick(),
        )
        .unwrap();
        assert_eq!(sel.best, Some(1));
        let failed = &sel.evaluations[0].report;
        assert!(!failed.is_ok());
        assert!(failed.error.as_ref().unwrap().contains("exceeds"));
        let t = summary_table(&[failed.clone(), sel.evaluations[1].report.clone()]);
        assert_eq!(t.records[0][1], "1");
        assert_eq!(t.records[1][13], "failed");
    }

    #[test]
    fn unset_k_runs_the_selection_loop() {
        let d = nested_blobs(3, 3, 500, 4, 1).to_dataset().unwrap();
        let e = evaluate_candidate(0, &config(pca(), None), &d, &quick());
        assert!(e.report.is_ok(), "{:?}", e.report.error);
        let trace = e.map.as_ref().unwrap().trace.as_ref().unwrap();
        assert_eq!(e.report.k, Some(trace.k_star));
    }

    #[test]
    fn ties_go_to_the_first_candidate() {
        let mk = |index, v: Option<f64>| EvaluationReport {
            index,
            config_id: format!("c{index}"),
            embedding: "pca".into(),
            clustering: "kmeans".into(),
            k: Some(2),
            out_dim: Some(2),
            error: v.is_none().then(|| "boom".to_string()),
            pairwise: None,
            min_pair: v.map(|value| MinPair { a: 0, b: 1, value }),
            overall_weighted_accuracy: v,
            diagnostics: Diagnostics::default(),
        };
        let rs = [mk(0, None), mk(1, Some(0.8)), mk(2, Some(0.9)), mk(3, Some(0.9))];
        assert_eq!(best_of(&rs), Some(2));
        let t = summary_table(&rs);
        let order: Vec<&str> = t.records.iter().map(|r| r[1].as_str()).collect();
        assert_eq!(order, ["2", "3", "1", "0"]);
    }

    #[test]
    fn reports_round_trip() {
        let d = Dataset::new(
            ndarray::array![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [0.0, 0.1], [5.0, 5.1]],
            Labels::Categorical(vec![0, 0, 1, 1, 0, 1]),
            vec![Split::Train, Split::Train, Split::Train, Split::Train, Split::Test, Split::Test],
            Task::Classification,
            Some(2),
        )
        .unwrap();
        let e = evaluate_candidate(5, &config(pca(), Some(2)), &d, &quick());
        let dir = tempfile::tempdir().unwrap();
        save_report(&e.report, dir.path()).unwrap();
        let back = load_report(dir.path()).unwrap();
        assert_eq!(back.config_id, e.report.config_id);
        assert_eq!(back.index, 5);
        assert_eq!(back.min_pair, e.report.min_pair);
        let (a, b) = (back.pairwise.unwrap(), e.report.pairwise.unwrap());
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan())));
    }
}
