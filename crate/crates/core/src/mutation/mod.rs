//! Mutation-killing analysis over a topographical map.
//!
//! A mutant is killed when the per-run performance of its retrained
//! instances differs from the original model's both significantly and
//! with a non-trivial effect. The map decides which test inputs the test
//! looks at: regions are added densest-in-contributors first until the
//! inputs gathered so far kill the mutant.

mod aggregation;
mod runset;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::CsvTable;

pub use aggregation::{
    build_killing_aggregation, density_order, kill_half_full, killing_strength, random_baseline,
    BaselineResult, ClusterStrength, Configuration, KillingAggregation, OperatorKill,
};
pub use runset::{
    build_runset, contributors, metric_on_subset, misprediction_probability, RunSet, Truth,
};
pub use stats::{cohens_d, is_killed, mann_whitney_u, KillVerdict, ALPHA, MIN_EFFECT};

/// Random-subset repetitions used when none are configured.
pub const DEFAULT_BASELINE_REPEATS: usize = 10;

/// Aggregation plus random baseline of equal size for one mutant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantOutcome {
    pub mutant_id: String,
    pub operator: String,
    pub aggregation: KillingAggregation,
    pub baseline: BaselineResult,
}

pub fn analyze_mutant(
    mutant_id: &str,
    operator: &str,
    clusters_of_inputs: &[usize],
    orig: &RunSet,
    mutant: &RunSet,
    repeats: usize,
    seed: u64,
) -> Result<MutantOutcome> {
    let aggregation = build_killing_aggregation(mutant_id, clusters_of_inputs, orig, mutant)?;
    let baseline = random_baseline(aggregation.members.len(), repeats, orig, mutant, seed)?;
    Ok(MutantOutcome {
        mutant_id: mutant_id.to_string(),
        operator: operator.to_string(),
        aggregation,
        baseline,
    })
}

/// One row per mutant; `clusters` lists the aggregation in insertion order,
/// `;`-separated.
pub fn report_table(outcomes: &[MutantOutcome]) -> CsvTable {
    let mut t = CsvTable::new([
        "mutant",
        "operator",
        "killable",
        "rho_k",
        "rho_c",
        "rho_d",
        "rho_c_random",
        "p_value",
        "effect_size",
        "clusters",
    ]);
    for o in outcomes {
        let a = &o.aggregation;
        let clusters: Vec<String> = a.clusters.iter().map(|c| c.to_string()).collect();
        t.push([
            o.mutant_id.clone(),
            o.operator.clone(),
            a.killable.to_string(),
            a.rho_k.to_string(),
            a.rho_c.to_string(),
            o.baseline.rho_d.to_string(),
            o.baseline.rho_c_random.to_string(),
            a.verdict.p_value.to_string(),
            a.verdict.effect_size.to_string(),
            clusters.join(";"),
        ]);
    }
    t
}

pub fn strength_table(strengths: &[ClusterStrength]) -> CsvTable {
    let mut t = CsvTable::new(["rank", "cluster", "aggregations", "rho_a"]);
    for (i, s) in strengths.iter().enumerate() {
        t.push([
            (i + 1).to_string(),
            s.cluster.to_string(),
            s.count.to_string(),
            s.rho_a.to_string(),
        ]);
    }
    t
}

pub fn kill_half_full_table(rows: &[OperatorKill]) -> CsvTable {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut t = CsvTable::new(["operator", "configurations", "killable", "kill_half", "kill_full"]);
    for r in rows {
        t.push([
            r.operator.clone(),
            r.configurations.to_string(),
            r.killable.to_string(),
            opt(r.kill_half),
            opt(r.kill_full),
        ]);
    }
    t
}
