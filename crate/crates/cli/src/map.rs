use std::path::{Path, PathBuf};

use serde::Serialize;
use topomap::datamodel::load_dataset;
use topomap::evaluator::{save_report, select_configuration, summary_table, ClusteringConfiguration};
use topomap::io::{self, CsvTable};
use topomap::topograph::{build_topograph, export_graph, GraphFormat};
use topomap::{clustering, embedding};

use crate::{core_validation, load_run, with_pool, CliError, RunArgs};

#[derive(Serialize)]
struct SelectionRecord<'a> {
    candidate: usize,
    config_id: &'a str,
    k: usize,
    min_pair: (usize, usize, f64),
    configuration: ClusteringConfiguration,
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    json.push('\n');
    io::write_atomic(path, json.as_bytes())?;
    Ok(())
}

/// Evaluates every candidate and persists all reports, the ranking in
/// `summary.csv`, the winning map under `map/` and its graph under
/// `graph/`. Returns the artifact directory.
pub fn cmd_map(args: &RunArgs) -> Result<PathBuf, CliError> {
    let (cfg, out) = load_run(args)?;
    if cfg.candidates.is_empty() {
        return Err(CliError::Validation("no candidate configurations".into()));
    }
    let dataset = load_dataset(&cfg.dataset).map_err(core_validation)?;
    let confs = cfg.configurations();
    let selection = with_pool(args.jobs, || select_configuration(&confs, &dataset, &cfg.classifier))??;

    let map_dir = out.join("map");
    let mut errors = CsvTable::new(["candidate", "config", "error"]);
    for ev in &selection.evaluations {
        let dir = map_dir.join("candidates").join(ev.report.index.to_string());
        save_report(&ev.report, &dir)?;
        if let Some(trace) = ev.map.as_ref().and_then(|m| m.trace.as_ref()) {
            trace.save(&dir.join("trace.csv"))?;
        }
        if let Some(e) = &ev.report.error {
            errors.push([
                ev.report.index.to_string(),
                ev.report.config_id.replace(',', ";"),
                e.replace([',', '\n'], " "),
            ]);
        }
    }
    errors.write(&map_dir.join("errors.csv"))?;
    let reports: Vec<_> = selection.evaluations.iter().map(|e| e.report.clone()).collect();
    let summary = out.join("summary.csv");
    summary_table(&reports).write(&summary)?;

    let Some(best) = selection.best else {
        return Err(CliError::AllCandidatesFailed(summary));
    };
    let winner = &selection.evaluations[best];
    let map = winner.map.as_ref().expect("successful candidate keeps its map");
    let report = &winner.report;
    let min = report.min_pair.expect("successful candidate has a minimum pair");
    let k = report.k.expect("successful candidate has k");
    log::info!("selected candidate {best}: {} (min w_acc {})", report.config_id, min.value);

    write_json(
        &map_dir.join("selection.json"),
        &SelectionRecord {
            candidate: best,
            config_id: &report.config_id,
            k,
            min_pair: (min.a, min.b, min.value),
            configuration: ClusteringConfiguration {
                k: Some(k),
                ..confs[best].clone()
            },
        },
    )?;
    embedding::export_embedding(&map_dir.join("embedding.tmx"), &map.embedded)?;
    if let Some(model) = &map.embedding_model {
        embedding::save_model(model, &map_dir.join("embedding_model"))?;
    }
    clustering::save_model(&map.cluster, &map_dir.join("cluster"))?;
    io::write_id_column(&map_dir.join("assignments.csv"), "cluster", &map.assignments)?;
    let mut test = CsvTable::new(["input", "row", "cluster"]);
    for (i, &row) in dataset.split_index().test.iter().enumerate() {
        test.push([i, row, map.assignments[row]]);
    }
    test.write(&map_dir.join("test_clusters.csv"))?;
    if let Some(trace) = &map.trace {
        trace.save(&map_dir.join("trace.csv"))?;
    }

    let graph = build_topograph(&map.cluster, &[])?;
    let graph_dir = out.join("graph");
    export_graph(&graph, GraphFormat::Gexf, &graph_dir.join("topomap.gexf"))?;
    export_graph(&graph, GraphFormat::Dot, &graph_dir.join("topomap.dot"))?;
    Ok(out)
}
