use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use topomap::clustering;
use topomap::datamodel::load_dataset;
use topomap::evaluator::{min_of_matrix, pairwise_matrix, weighted_pairwise_accuracy};
use topomap::io::{self, CsvTable};
use topomap::kselect::{select_k, KSelectionTrace};
use topomap::topograph::{build_topograph, export_graph, GraphFormat};

use crate::{core_validation, load_run, with_pool, CliError, RunArgs};

/// Runs the k-selection loop on every candidate's embedding, writes each
/// trace to `kselect/candidate_<i>.csv` and prints one
/// `candidate,config,k_star,exhausted` line per candidate.
pub fn cmd_select_k(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, out) = load_run(args)?;
    let dataset = load_dataset(&cfg.dataset).map_err(core_validation)?;
    let (labels, n_classes) = dataset.categorical_labels().map_err(core_validation)?;
    let idx = dataset.split_index();
    let pick = |rows: &[usize]| rows.iter().map(|&r| labels[r]).collect::<Vec<_>>();
    let (y_train, y_test) = (pick(&idx.train), pick(&idx.test));
    let confs = cfg.configurations();

    let traces: Vec<topomap::Result<KSelectionTrace>> = with_pool(args.jobs, || {
        confs
            .par_iter()
            .map(|c| {
                let (emb, _) = c.embedding.embed(&dataset, c.seed)?;
                select_k(
                    emb.rows(&idx.train).view(),
                    emb.rows(&idx.test).view(),
                    &y_train,
                    &y_test,
                    n_classes,
                    &c.clustering,
                    c.seed,
                )
            })
            .collect()
    })?;

    let mut table = CsvTable::new(["candidate", "config", "k_star", "exhausted"]);
    for (i, (c, t)) in confs.iter().zip(traces).enumerate() {
        let t = t?;
        t.save(&out.join("kselect").join(format!("candidate_{i}.csv")))?;
        table.push([
            i.to_string(),
            c.id().replace(',', ";"),
            t.k_star.to_string(),
            t.exhausted.to_string(),
        ]);
    }
    print!("{}", table.to_text());
    Ok(())
}

fn read_strengths(path: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    let table = CsvTable::read(path).map_err(core_validation)?;
    let (Some(c), Some(r)) = (table.column("cluster"), table.column("rho_a")) else {
        return Err(CliError::Validation(format!(
            "{}: needs `cluster` and `rho_a` columns",
            path.display()
        )));
    };
    table
        .records
        .iter()
        .map(|rec| match (rec[c].parse(), rec[r].parse()) {
            (Ok(cluster), Ok(rho)) => Ok((cluster, rho)),
            _ => Err(CliError::Validation(format!("{}: bad record {rec:?}", path.display()))),
        })
        .collect()
}

/// Rebuilds the graph of a persisted map, optionally colored with the
/// killing strengths from a `mutate` run, and writes it in `format`.
pub fn cmd_export_graph(
    map_dir: &Path,
    out: &Path,
    format: &str,
    strengths: Option<&Path>,
) -> Result<(), CliError> {
    let format: GraphFormat = format.parse().map_err(core_validation)?;
    let model = clustering::load_model(&map_dir.join("cluster")).map_err(core_validation)?;
    let strengths = strengths.map(read_strengths).transpose()?.unwrap_or_default();
    let graph = build_topograph(&model, &strengths).map_err(core_validation)?;
    export_graph(&graph, format, out)?;
    Ok(())
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

/// Scores predicted against true labels, both `row,<label>` CSVs. With a
/// pair, returns `a,b,w_acc` for it; otherwise every pair `a < b` of the
/// labels seen, with `is_min` marking the minimum.
pub fn cmd_eval_pair(
    pred: &Path,
    truth: &Path,
    pair: Option<(usize, usize)>,
) -> Result<String, CliError> {
    let p = io::read_id_column(pred).map_err(core_validation)?;
    let t = io::read_id_column(truth).map_err(core_validation)?;
    if p.len() != t.len() {
        return Err(CliError::Validation(format!(
            "{} has {} rows, {} has {}",
            pred.display(),
            p.len(),
            truth.display(),
            t.len()
        )));
    }
    let mut text = String::new();
    if let Some((a, b)) = pair {
        let v = weighted_pairwise_accuracy(&p, &t, a, b).map_err(core_validation)?;
        text.push_str("a,b,w_acc\n");
        let _ = writeln!(text, "{a},{b},{}", fmt_value(v));
        return Ok(text);
    }
    let k = p.iter().chain(&t).max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(CliError::Validation("need at least two distinct labels".into()));
    }
    let m = pairwise_matrix(&p, &t, k)?;
    let min = min_of_matrix(&m);
    text.push_str("a,b,w_acc,is_min\n");
    for a in 0..k {
        for b in a + 1..k {
            let v = m[[a, b]];
            let is_min = min.is_some_and(|x| (x.a, x.b) == (a, b));
            let _ = writeln!(text, "{a},{b},{},{is_min}", fmt_value(v.is_finite().then_some(v)));
        }
    }
    Ok(text)
}
