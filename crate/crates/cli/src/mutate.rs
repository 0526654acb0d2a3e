use std::path::{Path, PathBuf};

use ndarray::Axis;
use rayon::prelude::*;
use topomap::clustering;
use topomap::datamodel::{load_dataset, Labels};
use topomap::io::CsvTable;
use topomap::mutation::{
    analyze_mutant, build_runset, contributors, kill_half_full, kill_half_full_table,
    killing_strength, misprediction_probability, report_table, strength_table, Configuration,
    MutantOutcome, RunSet, Truth,
};
use topomap::topograph::{build_topograph, export_graph, GraphFormat};

use crate::{core_validation, load_run, with_pool, CliError, RunArgs};

const MANIFEST_HEADER: [&str; 4] = ["mutant_id", "operator", "configuration", "predictions_path"];

struct MutantEntry {
    id: String,
    operator: String,
    predictions: PathBuf,
}

fn read_manifest(path: &Path) -> Result<Vec<MutantEntry>, CliError> {
    let table = CsvTable::read(path).map_err(core_validation)?;
    if table.header != MANIFEST_HEADER {
        return Err(CliError::Validation(format!(
            "{}: expected header `{}`",
            path.display(),
            MANIFEST_HEADER.join(",")
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::with_capacity(table.records.len());
    for rec in &table.records {
        if !seen.insert(rec[0].clone()) {
            return Err(CliError::Validation(format!("duplicate mutant id {:?}", rec[0])));
        }
        let p = Path::new(&rec[3]);
        entries.push(MutantEntry {
            id: rec[0].clone(),
            operator: rec[1].clone(),
            predictions: if p.is_absolute() { p.to_path_buf() } else { base.join(p) },
        });
    }
    Ok(entries)
}

/// `input,row,cluster` rows written by `map`: the cluster of each test input
/// in prediction-column order.
fn read_test_clusters(path: &Path) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    let table = CsvTable::read(path).map_err(core_validation)?;
    if table.header != ["input", "row", "cluster"] {
        return Err(CliError::Validation(format!("{}: not a test cluster table", path.display())));
    }
    let mut rows = Vec::new();
    let mut clusters = Vec::new();
    for (i, rec) in table.records.iter().enumerate() {
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CliError::Validation(format!("{}: bad value {s:?}", path.display())))
        };
        if parse(&rec[0])? != i {
            return Err(CliError::Validation(format!("{}: inputs out of order", path.display())));
        }
        rows.push(parse(&rec[1])?);
        clusters.push(parse(&rec[2])?);
    }
    Ok((rows, clusters))
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Analyzes every mutant in the manifest against the map: greedy killing
/// aggregation, random baseline, cluster killing strength, KillHalf /
/// KillFull per operator, and the graph re-exported with strengths.
/// Mutants that cannot be analyzed are listed in `mutation/errors.csv`
/// and turn the result into [`CliError::PartialMutants`].
pub fn cmd_mutate(args: &RunArgs, map_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let (cfg, out) = load_run(args)?;
    let mcfg = cfg
        .mutation
        .clone()
        .ok_or_else(|| CliError::Validation("configuration has no `mutation` section".into()))?;
    let map_dir = map_dir.map_or_else(|| out.join("map"), Path::to_path_buf);
    let (rows, clusters) = read_test_clusters(&map_dir.join("test_clusters.csv"))?;
    let cluster_model = clustering::load_model(&map_dir.join("cluster")).map_err(core_validation)?;
    let dataset = load_dataset(&cfg.dataset).map_err(core_validation)?;
    if dataset.split_index().test != rows {
        return Err(CliError::Validation(
            "map test inputs do not match the dataset's test rows".into(),
        ));
    }

    let class_truth: Vec<usize>;
    let value_truth;
    let truth = match dataset.labels() {
        Labels::Categorical(ids) => {
            class_truth = rows.iter().map(|&r| ids[r]).collect();
            Truth::Classes(&class_truth)
        }
        Labels::Continuous(m) => {
            if mcfg.tau.is_none() {
                return Err(CliError::Validation("regression mutation analysis needs `tau`".into()));
            }
            value_truth = m.select(Axis(0), &rows);
            Truth::Values(value_truth.view())
        }
    };
    let orig = build_runset(&mcfg.original, "original", truth, mcfg.tau).map_err(core_validation)?;
    if orig.n_inputs() != clusters.len() {
        return Err(CliError::Validation(format!(
            "original predictions cover {} inputs, the map has {}",
            orig.n_inputs(),
            clusters.len()
        )));
    }
    let entries = read_manifest(&mcfg.mutants)?;

    let results: Vec<Result<(RunSet, MutantOutcome), String>> = with_pool(args.jobs, || {
        entries
            .par_iter()
            .enumerate()
            .map(|(i, e)| {
                let runs = build_runset(&e.predictions, &e.id, truth, mcfg.tau).map_err(|x| x.to_string())?;
                let outcome = analyze_mutant(
                    &e.id,
                    &e.operator,
                    &clusters,
                    &orig,
                    &runs,
                    mcfg.baseline_repeats,
                    cfg.seed.wrapping_add(i as u64),
                )
                .map_err(|x| x.to_string())?;
                Ok((runs, outcome))
            })
            .collect()
    })?;

    let dir = out.join("mutation");
    let mut errors = CsvTable::new(["mutant", "error"]);
    let mut done: Vec<(RunSet, MutantOutcome)> = Vec::new();
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(x) => done.push(x),
            Err(msg) => {
                log::warn!("mutant {}: {msg}", e.id);
                errors.push([e.id.replace(',', ";"), msg.replace([',', '\n'], " ")]);
            }
        }
    }

    let outcomes: Vec<MutantOutcome> = done.iter().map(|d| d.1.clone()).collect();
    report_table(&outcomes).write(&dir.join("report.csv"))?;
    errors.write(&dir.join("errors.csv"))?;

    let p_orig = misprediction_probability(&orig);
    for (runs, o) in &done {
        let p_mut = misprediction_probability(runs);
        let contrib = contributors(&orig, runs)?;
        let mut t = CsvTable::new([
            "input",
            "row",
            "cluster",
            "p_original",
            "p_mutant",
            "contributor",
            "in_aggregation",
        ]);
        for i in 0..clusters.len() {
            t.push([
                i.to_string(),
                rows[i].to_string(),
                clusters[i].to_string(),
                p_orig[i].to_string(),
                p_mut[i].to_string(),
                contrib.binary_search(&i).is_ok().to_string(),
                o.aggregation.members.binary_search(&i).is_ok().to_string(),
            ]);
        }
        t.write(&dir.join("mutants").join(format!("{}.csv", file_stem(&o.mutant_id))))?;
    }

    let aggregations: Vec<_> = outcomes.iter().map(|o| o.aggregation.clone()).collect();
    let strengths = killing_strength(&aggregations).unwrap_or_default();
    strength_table(&strengths).write(&dir.join("strength.csv"))?;
    let configs: Vec<Configuration<'_>> = done
        .iter()
        .map(|(runs, o)| Configuration {
            operator: &o.operator,
            aggregation: &o.aggregation,
            runs,
        })
        .collect();
    kill_half_full_table(&kill_half_full(&orig, &configs)?).write(&dir.join("kill_half_full.csv"))?;

    let pairs: Vec<(usize, f64)> = strengths.iter().map(|s| (s.cluster, s.rho_a)).collect();
    let graph = build_topograph(&cluster_model, &pairs)?;
    let graph_dir = out.join("graph");
    export_graph(&graph, GraphFormat::Gexf, &graph_dir.join("topomap.gexf"))?;
    export_graph(&graph, GraphFormat::Dot, &graph_dir.join("topomap.dot"))?;

    if errors.records.is_empty() {
        Ok(dir)
    } else {
        Err(CliError::PartialMutants {
            failed: errors.records.len(),
            report: dir.join("errors.csv"),
        })
    }
}
