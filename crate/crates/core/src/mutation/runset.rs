use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::datamodel::Task;
use crate::error::{Error, Result};
use crate::io;

/// Ground truth for the test inputs a prediction file refers to.
#[derive(Debug, Clone, Copy)]
pub enum Truth<'a> {
    Classes(&'a [usize]),
    /// One row per test input, one column per output dimension.
    Values(ArrayView2<'a, f64>),
}

/// The per-input outcomes of `N` independently trained instances of one
/// model on the test inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub model_id: String,
    pub task: Task,
    pub tau: Option<f64>,
    /// `N × |X_test|`; `true` marks a misprediction.
    correctness: Array2<bool>,
    metric_per_run: Vec<f64>,
    /// Regression only: squared error of every run on every input, summed
    /// over output dimensions. Enough to recompute MSE on any subset.
    sq_error: Option<Array2<f64>>,
    out_dim: usize,
}

impl RunSet {
    /// Classification outcomes given directly as misprediction bits.
    pub fn from_correctness(model_id: impl Into<String>, correctness: Array2<bool>) -> Result<Self> {
        check_runs(correctness.nrows())?;
        let n = correctness.ncols() as f64;
        let metric_per_run = correctness
            .rows()
            .into_iter()
            .map(|r| 1.0 - r.iter().filter(|&&m| m).count() as f64 / n)
            .collect();
        Ok(RunSet {
            model_id: model_id.into(),
            task: Task::Classification,
            tau: None,
            correctness,
            metric_per_run,
            sq_error: None,
            out_dim: 1,
        })
    }

    /// Class-id predictions (`N × |X_test|`, ids stored as floats).
    pub fn classification(
        model_id: impl Into<String>,
        predictions: ArrayView2<'_, f64>,
        truth: &[usize],
    ) -> Result<Self> {
        if predictions.ncols() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predictions.ncols(),
            });
        }
        let mut bits = Array2::from_elem(predictions.dim(), false);
        for ((r, c), &p) in predictions.indexed_iter() {
            if !(p >= 0.0 && p.fract() == 0.0 && p.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "run {r}, input {c}: {p} is not a class id"
                )));
            }
            bits[[r, c]] = p as usize != truth[c];
        }
        Self::from_correctness(model_id, bits)
    }

    /// Real-valued predictions. Columns hold the `dim` outputs of each input
    /// next to each other: input `i` occupies columns `i·dim .. (i+1)·dim`.
    /// A run mispredicts an input when the Euclidean error is at least `tau`.
    pub fn regression(
        model_id: impl Into<String>,
        predictions: ArrayView2<'_, f64>,
        truth: ArrayView2<'_, f64>,
        tau: f64,
    ) -> Result<Self> {
        check_runs(predictions.nrows())?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
        }
        let (n, dim) = truth.dim();
        if predictions.ncols() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                found: predictions.ncols(),
            });
        }
        let runs = predictions.nrows();
        let sq = Array2::from_shape_fn((runs, n), |(r, i)| {
            (0..dim)
                .map(|d| (predictions[[r, i * dim + d]] - truth[[i, d]]).powi(2))
                .sum::<f64>()
        });
        if let Some(((r, i), _)) = sq.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, col: i });
        }
        let correctness = sq.mapv(|e| e.sqrt() >= tau);
        let metric_per_run = sq
            .rows()
            .into_iter()
            .map(|r| r.sum() / (n * dim) as f64)
            .collect();
        Ok(RunSet {
            model_id: model_id.into(),
            task: Task::Regression,
            tau: Some(tau),
            correctness,
            metric_per_run,
            sq_error: Some(sq),
            out_dim: dim,
        })
    }

    pub fn n_runs(&self) -> usize {
        self.correctness.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.correctness.ncols()
    }

    pub fn correctness(&self) -> &Array2<bool> {
        &self.correctness
    }

    /// Accuracy per run for classification, MSE per run for regression.
    pub fn metric_per_run(&self) -> &[f64] {
        &self.metric_per_run
    }
}

fn check_runs(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "a run set needs at least 2 runs, got {n}"
        )));
    }
    Ok(())
}

/// Reads a TMX prediction file (`N` rows) and scores it against `truth`.
pub fn build_runset(
    predictions_path: &Path,
    model_id: &str,
    truth: Truth<'_>,
    tau: Option<f64>,
) -> Result<RunSet> {
    let preds = io::read_tmx(predictions_path)?;
    match truth {
        Truth::Classes(t) => RunSet::classification(model_id, preds.view(), t),
        Truth::Values(t) => {
            let tau = tau.ok_or_else(|| {
                Error::InvalidInput("regression run sets need the threshold tau".into())
            })?;
            RunSet::regression(model_id, preds.view(), t, tau)
        }
    }
}

/// `P^K(x)`: fraction of runs that mispredict each input.
pub fn misprediction_probability(rs: &RunSet) -> Vec<f64> {
    let runs = rs.n_runs() as f64;
    rs.correctness
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|&&m| m).count() as f64 / runs)
        .collect()
}

/// Inputs the mutant mispredicts strictly more often than the original.
/// The run counts may differ; the inputs must not.
pub fn contributors(orig: &RunSet, mutant: &RunSet) -> Result<Vec<usize>> {
    if orig.n_inputs() != mutant.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: orig.n_inputs(),
            found: mutant.n_inputs(),
        });
    }
    let (po, pm) = (misprediction_probability(orig), misprediction_probability(mutant));
    Ok((0..po.len()).filter(|&i| po[i] < pm[i]).collect())
}

/// The run metric restricted to `rows` (input positions).
pub fn metric_on_subset(rs: &RunSet, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("metric on an empty input subset".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= rs.n_inputs()) {
        return Err(Error::InvalidInput(format!(
            "input {bad} out of range for {} inputs",
            rs.n_inputs()
        )));
    }
    let m = rows.len() as f64;
    Ok(match &rs.sq_error {
        None => rs
            .correctness
            .rows()
            .into_iter()
            .map(|r| 1.0 - rows.iter().filter(|&&i| r[i]).count() as f64 / m)
            .collect(),
        Some(sq) => sq
            .rows()
            .into_iter()
            .map(|r| rows.iter().map(|&i| r[i]).sum::<f64>() / (m * rs.out_dim as f64))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(runs: usize, n: usize, seed: u64) -> Array2<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((runs, n), || rng.random_bool(0.3))
    }

    #[test]
    fn perfect_predictions() {
        let truth = [0, 1, 2, 1];
        let preds = array![[0.0, 1.0, 2.0, 1.0], [0.0, 1.0, 2.0, 1.0]];
        let rs = RunSet::classification("m", preds.view(), &truth).unwrap();
        assert!(rs.correctness().iter().all(|&m| !m));
        assert_eq!(rs.metric_per_run(), &[1.0, 1.0]);
    }

    #[test]
    fn metric_is_one_minus_error_rate() {
        let bits = random_bits(7, 33, 1);
        let rs = RunSet::from_correctness("m", bits.clone()).unwrap();
        for (r, row) in bits.rows().into_iter().enumerate() {
            let wrong = row.iter().filter(|&&b| b).count();
            assert!((rs.metric_per_run()[r] - (1.0 - wrong as f64 / 33.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        // 2-D: errors (0.3, 0) hits tau exactly; (0.1, 0.1) stays below
        let truth = array![[0.0, 0.0], [1.0, 1.0]];
        let preds = array![[0.3, 0.0, 1.1, 1.1], [0.0, 0.0, 1.0, 1.0]];
        let rs = RunSet::regression("m", preds.view(), truth.view(), 0.3).unwrap();
        assert_eq!(rs.correctness(), &array![[true, false], [false, false]]);
        // MSE over the four output values of run 0
        assert!((rs.metric_per_run()[0] - (0.09 + 0.01 + 0.01) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn regression_needs_tau() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.tmx");
        io::write_tmx(&p, &array![[0.0], [0.0]]).unwrap();
        let truth = array![[0.0]];
        assert!(build_runset(&p, "m", Truth::Values(truth.view()), None).is_err());
        assert!(build_runset(&p, "m", Truth::Values(truth.view()), Some(0.5)).is_ok());
    }

    #[test]
    fn one_run_is_rejected() {
        assert!(RunSet::from_correctness("m", Array2::from_elem((1, 3), false)).is_err());
    }

    #[test]
    fn probability_counts_runs() {
        let mut bits = Array2::from_elem((20, 2), false);
        for r in [0, 4, 9, 13, 19] {
            bits[[r, 0]] = true;
        }
        let rs = RunSet::from_correctness("m", bits).unwrap();
        assert_eq!(misprediction_probability(&rs), vec![0.25, 0.0]);
    }

    #[test]
    fn contributors_need_a_strict_increase() {
        let bits = random_bits(10, 50, 2);
        let a = RunSet::from_correctness("a", bits.clone()).unwrap();
        assert!(contributors(&a, &a).unwrap().is_empty());

        let mut orig = Array2::from_elem((20, 3), false);
        let mut mutant = orig.clone();
        mutant[[7, 1]] = true;
        orig[[3, 2]] = true;
        let o = RunSet::from_correctness("o", orig).unwrap();
        let m = RunSet::from_correctness("m", mutant).unwrap();
        assert_eq!(contributors(&o, &m).unwrap(), vec![1]);
    }

    #[test]
    fn contributors_match_a_recount_with_different_run_counts() {
        let ob = random_bits(8, 40, 3);
        let mb = random_bits(13, 40, 4);
        let o = RunSet::from_correctness("o", ob.clone()).unwrap();
        let m = RunSet::from_correctness("m", mb.clone()).unwrap();
        let mut want = Vec::new();
        for i in 0..40 {
            let co = (0..8).filter(|&r| ob[[r, i]]).count();
            let cm = (0..13).filter(|&r| mb[[r, i]]).count();
            // co/8 < cm/13 without division
            if co * 13 < cm * 8 {
                want.push(i);
            }
        }
        assert_eq!(contributors(&o, &m).unwrap(), want);
        let short = RunSet::from_correctness("s", random_bits(8, 39, 5)).unwrap();
        assert!(contributors(&o, &short).is_err());
    }

    #[test]
    fn subset_metrics() {
        let bits = random_bits(6, 30, 6);
        let rs = RunSet::from_correctness("m", bits.clone()).unwrap();
        let all: Vec<usize> = (0..30).collect();
        assert_eq!(metric_on_subset(&rs, &all).unwrap(), rs.metric_per_run());

        let mut single = Array2::from_elem((4, 2), false);
        single[[1, 0]] = true;
        single[[3, 0]] = true;
        let s = RunSet::from_correctness("s", single).unwrap();
        // runs numbered from 1: mispredicted in runs 2 and 4
        assert_eq!(metric_on_subset(&s, &[0]).unwrap(), vec![1.0, 0.0, 1.0, 0.0]);

        let rows = [2, 5, 11, 17, 29];
        let got = metric_on_subset(&rs, &rows).unwrap();
        for r in 0..6 {
            let wrong = rows.iter().filter(|&&i| bits[[r, i]]).count();
            assert!((got[r] - (1.0 - wrong as f64 / 5.0)).abs() < 1e-12);
        }
        assert!(metric_on_subset(&rs, &[]).is_err());
    }

    #[test]
    fn regression_subset_mse() {
        let truth = array![[0.0], [0.0], [0.0]];
        let preds = array![[1.0, 2.0, 3.0], [0.0, 0.0, 1.0]];
        let rs = RunSet::regression("m", preds.view(), truth.view(), 0.5).unwrap();
        assert_eq!(metric_on_subset(&rs, &[1, 2]).unwrap(), vec![6.5, 0.5]);
    }
}
