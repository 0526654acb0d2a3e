use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::runset::{contributors, metric_on_subset, RunSet};
use super::stats::{is_killed, KillVerdict};
use crate::error::{Error, Result};

/// Density-ordered union of map regions whose inputs kill a mutant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillingAggregation {
    pub mutant_id: String,
    /// Cluster ids in the order they were added.
    pub clusters: Vec<usize>,
    /// Input positions covered, ascending.
    pub members: Vec<usize>,
    pub rho_k: f64,
    pub rho_c: f64,
    /// Verdict on the final member set.
    pub verdict: KillVerdict,
    pub killable: bool,
}

/// Members of each cluster id present in `clusters_of_inputs`.
fn cluster_members(clusters_of_inputs: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in clusters_of_inputs.iter().enumerate() {
        by.entry(c).or_default().push(i);
    }
    by
}

/// Clusters by contributor density, densest first, smaller id on ties.
/// Densities are compared as exact fractions. Clusters without inputs are
/// absent: they could not change any subset.
pub fn density_order(clusters_of_inputs: &[usize], contrib: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut is_contrib = vec![false; clusters_of_inputs.len()];
    for &c in contrib {
        is_contrib[c] = true;
    }
    let mut order: Vec<(usize, usize, usize)> = cluster_members(clusters_of_inputs)
        .into_iter()
        .map(|(c, rows)| (c, rows.iter().filter(|&&r| is_contrib[r]).count(), rows.len()))
        .collect();
    // a/b > c/d  ⇔  a·d > c·b
    order.sort_by(|x, y| match (y.1 * x.2).cmp(&(x.1 * y.2)) {
        Ordering::Equal => x.0.cmp(&y.0),
        o => o,
    });
    order
}

/// Greedily grows the aggregation one cluster at a time in density order
/// and stops at the first member set whose subset metrics kill the mutant.
/// A mutant no prefix kills is non-killable; its aggregation is the whole
/// input set.
pub fn build_killing_aggregation(
    mutant_id: &str,
    clusters_of_inputs: &[usize],
    orig: &RunSet,
    mutant: &RunSet,
) -> Result<KillingAggregation> {
    let n = clusters_of_inputs.len();
    if n == 0 {
        return Err(Error::InvalidInput("no test inputs to aggregate".into()));
    }
    if orig.n_inputs() != n || mutant.n_inputs() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if orig.n_inputs() != n { orig.n_inputs() } else { mutant.n_inputs() },
        });
    }
    let contrib = contributors(orig, mutant)?;
    let mut is_contrib = vec![false; n];
    for &c in &contrib {
        is_contrib[c] = true;
    }
    let by_cluster = cluster_members(clusters_of_inputs);

    let mut clusters = Vec::new();
    let mut members: Vec<usize> = Vec::new();
    let mut verdict = None;
    for (c, _, _) in density_order(clusters_of_inputs, &contrib) {
        clusters.push(c);
        members.extend(&by_cluster[&c]);
        members.sort_unstable();
        let v = is_killed(
            &metric_on_subset(orig, &members)?,
            &metric_on_subset(mutant, &members)?,
        );
        verdict = Some(v);
        if v.killed {
            break;
        }
    }
    let verdict = verdict.expect("at least one cluster");
    let in_members = members.iter().filter(|&&r| is_contrib[r]).count();
    Ok(KillingAggregation {
        mutant_id: mutant_id.to_string(),
        rho_k: members.len() as f64 / n as f64,
        rho_c: in_members as f64 / members.len() as f64,
        killable: verdict.killed,
        verdict,
        clusters,
        members,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub r: usize,
    pub size: usize,
    /// Fraction of random subsets that kill.
    pub rho_d: f64,
    /// Mean contributor fraction over the random subsets.
    pub rho_c_random: f64,
    pub seed: u64,
}

/// Kill rate of `r` uniformly drawn input subsets of `size` inputs each
/// (without replacement within a subset).
pub fn random_baseline(
    size: usize,
    r: usize,
    orig: &RunSet,
    mutant: &RunSet,
    seed: u64,
) -> Result<BaselineResult> {
    let n = orig.n_inputs();
    if size == 0 || size > n {
        return Err(Error::InvalidInput(format!(
            "baseline size {size} must be in 1..={n}"
        )));
    }
    if r == 0 {
        return Err(Error::InvalidInput("baseline needs at least one repetition".into()));
    }
    let contrib = contributors(orig, mutant)?;
    let mut is_contrib = vec![false; n];
    for &c in &contrib {
        is_contrib[c] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kills = 0;
    let mut density = 0.0;
    for _ in 0..r {
        let mut rows = rand::seq::index::sample(&mut rng, n, size).into_vec();
        rows.sort_unstable();
        let v = is_killed(
            &metric_on_subset(orig, &rows)?,
            &metric_on_subset(mutant, &rows)?,
        );
        kills += usize::from(v.killed);
        density += rows.iter().filter(|&&i| is_contrib[i]).count() as f64 / size as f64;
    }
    Ok(BaselineResult {
        r,
        size,
        rho_d: kills as f64 / r as f64,
        rho_c_random: density / r as f64,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStrength {
    pub cluster: usize,
    /// Killable aggregations containing the cluster.
    pub count: usize,
    pub rho_a: f64,
}

/// Share of killable aggregations that contain each cluster, strongest
/// first (smaller id on ties). Clusters in no killable aggregation are
/// omitted.
pub fn killing_strength(aggregations: &[KillingAggregation]) -> Result<Vec<ClusterStrength>> {
    let killable: Vec<&KillingAggregation> = aggregations.iter().filter(|a| a.killable).collect();
    if killable.is_empty() {
        return Err(Error::Infeasible("no killable aggregation".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for a in &killable {
        for &c in &a.clusters {
            *counts.entry(c).or_default() += 1;
        }
    }
    let total = killable.len() as f64;
    let mut out: Vec<ClusterStrength> = counts
        .into_iter()
        .map(|(cluster, count)| ClusterStrength {
            cluster,
            count,
            rho_a: count as f64 / total,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.cluster.cmp(&b.cluster)));
    Ok(out)
}

/// KillHalf / KillFull of one mutation operator. `None` when none of its
/// configurations is killable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorKill {
    pub operator: String,
    pub configurations: usize,
    pub killable: usize,
    pub kill_half: Option<f64>,
    pub kill_full: Option<f64>,
}

/// One mutant configuration as seen by [`kill_half_full`].
#[derive(Debug, Clone, Copy)]
pub struct Configuration<'a> {
    pub operator: &'a str,
    pub aggregation: &'a KillingAggregation,
    pub runs: &'a RunSet,
}

/// Tests every killable aggregation of an operator against all of the
/// operator's configurations (itself included). KillHalf is the share of
/// those aggregations killing at least ⌈m/2⌉ of the `m` configurations,
/// KillFull the share killing all of them. Operators are reported in order
/// of first appearance.
pub fn kill_half_full(orig: &RunSet, configs: &[Configuration<'_>]) -> Result<Vec<OperatorKill>> {
    let mut groups: Vec<(&str, Vec<&Configuration<'_>>)> = Vec::new();
    for c in configs {
        match groups.iter_mut().find(|g| g.0 == c.operator) {
            Some(g) => g.1.push(c),
            None => groups.push((c.operator, vec![c])),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (operator, members) in groups {
        let m = members.len();
        let half = m.div_ceil(2);
        let (mut killable, mut halves, mut fulls) = (0, 0, 0);
        for agg in members.iter().filter(|c| c.aggregation.killable) {
            killable += 1;
            let rows = &agg.aggregation.members;
            let base = metric_on_subset(orig, rows)?;
            let mut kills = 0;
            for sib in &members {
                if is_killed(&base, &metric_on_subset(sib.runs, rows)?).killed {
                    kills += 1;
                }
            }
            halves += usize::from(kills >= half);
            fulls += usize::from(kills == m);
        }
        let frac = |x: usize| (killable > 0).then(|| x as f64 / killable as f64);
        out.push(OperatorKill {
            operator: operator.to_string(),
            configurations: m,
            killable,
            kill_half: frac(halves),
            kill_full: frac(fulls),
        });
    }
    Ok(out)
}
