//! Mutation analysis on planted fixtures, checked against independent
//! recomputations.

#[path = "fixtures/mwu_oracle.rs"]
mod oracle;

use ndarray::Array2;
use topomap::mutation::*;
use topomap::synthetic::PlantedRuns;

#[test]
fn verdicts_match_the_precomputed_oracle() {
    for case in oracle::ORACLE {
        let v = is_killed(case.orig, case.mutant);
        assert!((v.p_value - case.p).abs() < 1e-6, "{}: p {} vs {}", case.name, v.p_value, case.p);
        assert!((v.effect_size - case.d).abs() < 1e-9, "{}: d {} vs {}", case.name, v.effect_size, case.d);
        assert_eq!(v.killed, case.killed, "{}", case.name);
    }
    let gate = oracle::ORACLE.iter().find(|c| c.name == "gate_small_effect").unwrap();
    assert!(gate.p < 0.05 && gate.d.abs() < 0.5 && !gate.killed);
}

fn runsets(base: &PlantedRuns, bits: Array2<bool>) -> (RunSet, RunSet) {
    (
        RunSet::from_correctness("orig", base.original.clone()).unwrap(),
        RunSet::from_correctness("mutant", bits).unwrap(),
    )
}

/// Density order recomputed with floating densities and a stable sort,
/// then the first killing prefix found by trying every prefix length.
fn first_killing_prefix(clusters: &[usize], k: usize, o: &RunSet, m: &RunSet) -> Option<Vec<usize>> {
    let po = misprediction_probability(o);
    let pm = misprediction_probability(m);
    let mut dens: Vec<(usize, f64)> = (0..k)
        .map(|c| {
            let rows: Vec<usize> = (0..clusters.len()).filter(|&i| clusters[i] == c).collect();
            let hits = rows.iter().filter(|&&i| po[i] < pm[i]).count();
            (c, hits as f64 / rows.len() as f64)
        })
        .collect();
    dens.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for len in 1..=k {
        let chosen: Vec<usize> = dens[..len].iter().map(|d| d.0).collect();
        let rows: Vec<usize> = (0..clusters.len()).filter(|&i| chosen.contains(&clusters[i])).collect();
        let v = is_killed(&metric_on_subset(o, &rows).unwrap(), &metric_on_subset(m, &rows).unwrap());
        if v.killed {
            return Some(chosen);
        }
    }
    None
}

#[test]
fn contributors_in_two_clusters_give_a_two_cluster_aggregation() {
    let base = PlantedRuns::new(10, 40, 20, 0.1, 101);
    let (bits, _) = base.mutant(&[3, 6], 0.5, 0.0, 0.15, 201);
    let (o, m) = runsets(&base, bits);
    let a = build_killing_aggregation("m", &base.clusters_of_inputs, &o, &m).unwrap();
    let mut got = a.clusters.clone();
    got.sort_unstable();
    assert_eq!(got, vec![3, 6]);
    assert_eq!(Some(a.clusters.clone()), first_killing_prefix(&base.clusters_of_inputs, 10, &o, &m));
    assert!((a.rho_k - 0.2).abs() < 1e-12);
}

/// Fifty mutants of varying strength and layout over one original.
fn suite() -> (PlantedRuns, Vec<(String, Array2<bool>)>) {
    let base = PlantedRuns::new(10, 40, 20, 0.1, 7);
    let strengths = [0.1, 0.15, 0.2, 0.3, 0.5];
    let mutants = (0..50)
        .map(|i| {
            let dense = [i % 10, (i * 3 + 1) % 10];
            let (bits, _) = base.mutant(&dense, 0.5, 0.05, strengths[i % 5], 1000 + i as u64);
            (format!("m{i:02}"), bits)
        })
        .collect();
    (base, mutants)
}

#[test]
fn killable_aggregations_are_greedy_minimal() {
    let (base, mutants) = suite();
    let o = RunSet::from_correctness("orig", base.original.clone()).unwrap();
    let mut killable = 0;
    for (id, bits) in mutants {
        let m = RunSet::from_correctness(&id, bits).unwrap();
        let a = build_killing_aggregation(&id, &base.clusters_of_inputs, &o, &m).unwrap();
        if !a.killable {
            assert_eq!(a.rho_k, 1.0);
            continue;
        }
        killable += 1;
        let kept = &a.clusters[..a.clusters.len() - 1];
        let rows: Vec<usize> = (0..base.clusters_of_inputs.len())
            .filter(|&i| kept.contains(&base.clusters_of_inputs[i]))
            .collect();
        if !rows.is_empty() {
            let v = is_killed(&metric_on_subset(&o, &rows).unwrap(), &metric_on_subset(&m, &rows).unwrap());
            assert!(!v.killed, "{id}: shorter aggregation still kills");
        }
    }
    assert!(killable >= 20, "only {killable} killable mutants");
}

#[test]
fn dense_aggregations_beat_global_contributor_density() {
    let (base, mutants) = suite();
    let o = RunSet::from_correctness("orig", base.original.clone()).unwrap();
    for (id, bits) in mutants {
        let m = RunSet::from_correctness(&id, bits).unwrap();
        let contrib = contributors(&o, &m).unwrap();
        let global = contrib.len() as f64 / o.n_inputs() as f64;
        let a = build_killing_aggregation(&id, &base.clusters_of_inputs, &o, &m).unwrap();
        let order = density_order(&base.clusters_of_inputs, &contrib);
        let top = order[0].1 as f64 / order[0].2 as f64;
        if top > global {
            assert!(a.rho_c >= global - 1e-12, "{id}: {} < {global}", a.rho_c);
        }
    }
}

#[test]
fn random_contributor_share_matches_the_hypergeometric_mean() {
    let base = PlantedRuns::new(10, 40, 20, 0.1, 11);
    let (bits, _) = base.mutant(&[1, 2], 0.5, 0.1, 0.5, 12);
    let (o, m) = runsets(&base, bits);
    let n = o.n_inputs() as f64;
    let p = contributors(&o, &m).unwrap().len() as f64 / n;
    let (size, r) = (60usize, 200usize);
    let b = random_baseline(size, r, &o, &m, 13).unwrap();
    let s = size as f64;
    let var = p * (1.0 - p) / s * (n - s) / (n - 1.0);
    let sigma = (var / r as f64).sqrt();
    assert!((b.rho_c_random - p).abs() <= 3.0 * sigma, "{} vs {p} ± {sigma}", b.rho_c_random);
}

#[test]
fn strength_and_kill_half_full_match_recounts() {
    let (base, mutants) = suite();
    let o = RunSet::from_correctness("orig", base.original.clone()).unwrap();
    let runs: Vec<RunSet> = mutants
        .iter()
        .map(|(id, bits)| RunSet::from_correctness(id, bits.clone()).unwrap())
        .collect();
    let aggs: Vec<KillingAggregation> = runs
        .iter()
        .map(|m| build_killing_aggregation(&m.model_id, &base.clusters_of_inputs, &o, m).unwrap())
        .collect();

    let strengths = killing_strength(&aggs).unwrap();
    let live: Vec<&KillingAggregation> = aggs.iter().filter(|a| a.killable).collect();
    for s in &strengths {
        let count = live.iter().filter(|a| a.clusters.contains(&s.cluster)).count();
        assert_eq!(s.count, count);
        assert!((s.rho_a - count as f64 / live.len() as f64).abs() < 1e-12);
    }
    assert!(strengths.windows(2).all(|w| w[0].count >= w[1].count));

    // three configurations per operator
    let ops: Vec<String> = (0..runs.len()).map(|i| format!("op{}", i / 3)).collect();
    let configs: Vec<Configuration<'_>> = (0..runs.len())
        .map(|i| Configuration { operator: &ops[i], aggregation: &aggs[i], runs: &runs[i] })
        .collect();
    let table = kill_half_full(&o, &configs).unwrap();
    assert_eq!(table.len(), 17);
    for row in &table {
        let idx: Vec<usize> = (0..runs.len()).filter(|&i| ops[i] == row.operator).collect();
        let mut half = 0;
        let mut full = 0;
        let mut live = 0;
        for &i in idx.iter().filter(|&&i| aggs[i].killable) {
            live += 1;
            let rows = &aggs[i].members;
            let kills = idx
                .iter()
                .filter(|&&j| {
                    is_killed(&metric_on_subset(&o, rows).unwrap(), &metric_on_subset(&runs[j], rows).unwrap()).killed
                })
                .count();
            if 2 * kills >= idx.len() {
                half += 1;
            }
            if kills == idx.len() {
                full += 1;
            }
        }
        assert_eq!(row.killable, live);
        if live == 0 {
            assert_eq!((row.kill_half, row.kill_full), (None, None));
        } else {
            assert_eq!(row.kill_half, Some(half as f64 / live as f64));
            assert_eq!(row.kill_full, Some(full as f64 / live as f64));
        }
    }
}
