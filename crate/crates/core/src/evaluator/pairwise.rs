use ndarray::Array2;

use crate::error::{Error, Result};

/// Confusion counts for one cluster pair. `ab` counts entries whose truth is
/// `a` and prediction `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub aa: usize,
    pub ab: usize,
    pub ba: usize,
    pub bb: usize,
}

impl PairCounts {
    pub fn tally(pred: &[usize], truth: &[usize], a: usize, b: usize) -> Self {
        let mut c = PairCounts::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (t == a, t == b, p == a, p == b) {
                (true, _, true, _) => c.aa += 1,
                (true, _, _, true) => c.ab += 1,
                (_, true, true, _) => c.ba += 1,
                (_, true, _, true) => c.bb += 1,
                _ => {}
            }
        }
        c
    }

    /// Kept entries whose truth is `a`.
    pub fn size_a(&self) -> usize {
        self.aa + self.ab
    }

    pub fn size_b(&self) -> usize {
        self.bb + self.ba
    }

    /// Weighted accuracy of the pair, `None` when no entry was kept.
    ///
    /// The minority side's terms are scaled by `w = larger / smaller`. The
    /// arithmetic is always arranged minority-first so that swapping the pair
    /// yields a bit-identical result. An empty side contributes nothing, which
    /// leaves plain accuracy on the other side.
    pub fn weighted_accuracy(&self) -> Option<f64> {
        let (sa, sb) = (self.size_a(), self.size_b());
        if sa == 0 && sb == 0 {
            return None;
        }
        // (correct, wrong) per side, minority first
        let (minor, major, small, large) = if sa < sb || (sa == sb && self.a_first_on_tie()) {
            ((self.aa, self.ab), (self.bb, self.ba), sa, sb)
        } else {
            ((self.bb, self.ba), (self.aa, self.ab), sb, sa)
        };
        let (wc, ww) = if small == 0 {
            (0.0, 0.0)
        } else {
            let w = large as f64 / small as f64;
            (w * minor.0 as f64, w * minor.1 as f64)
        };
        let correct = wc + major.0 as f64;
        let wrong = ww + major.1 as f64;
        Some(correct / (correct + wrong))
    }

    // With equal sizes w = 1 and every term is an exact integer, so the order
    // cannot change the result; fix one anyway to keep the code obviously
    // symmetric.
    fn a_first_on_tie(&self) -> bool {
        (self.aa, self.ab) <= (self.bb, self.ba)
    }
}

/// Weighted accuracy of clusters `a` and `b`: entries whose truth or prediction falls
/// outside `{a, b}` are discarded. Returns `None` when nothing is kept.
pub fn weighted_pairwise_accuracy(
    pred: &[usize],
    truth: &[usize],
    a: usize,
    b: usize,
) -> Result<Option<f64>> {
    if a == b {
        return Err(Error::InvalidInput(format!(
            "pairwise accuracy needs two distinct clusters, got {a} twice"
        )));
    }
    check_lengths(pred, truth)?;
    Ok(PairCounts::tally(pred, truth, a, b).weighted_accuracy())
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::RowCountMismatch {
            what: "predictions".into(),
            expected: truth.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// Symmetric `k × k` matrix of pairwise values; undefined pairs and the
/// diagonal hold NaN. Ids at or above `k` are ignored.
pub fn pairwise_matrix(pred: &[usize], truth: &[usize], k: usize) -> Result<Array2<f64>> {
    check_lengths(pred, truth)?;
    // one pass into a full confusion matrix, then read pairs off it
    let mut conf = vec![0usize; k * k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p < k && t < k {
            conf[t * k + p] += 1;
        }
    }
    let mut m = Array2::from_elem((k, k), f64::NAN);
    for a in 0..k {
        for b in a + 1..k {
            let c = PairCounts {
                aa: conf[a * k + a],
                ab: conf[a * k + b],
                ba: conf[b * k + a],
                bb: conf[b * k + b],
            };
            let v = c.weighted_accuracy().unwrap_or(f64::NAN);
            m[[a, b]] = v;
            m[[b, a]] = v;
        }
    }
    Ok(m)
}

/// The pair with the lowest defined value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinPair {
    pub a: usize,
    pub b: usize,
    pub value: f64,
}

/// Scans pairs `a < b` in lexicographic order; the first strict minimum wins.
pub fn min_of_matrix(m: &Array2<f64>) -> Option<MinPair> {
    let k = m.nrows();
    let mut best: Option<MinPair> = None;
    for a in 0..k {
        for b in a + 1..k {
            let v = m[[a, b]];
            if v.is_nan() {
                continue;
            }
            if best.is_none_or(|p| v < p.value) {
                best = Some(MinPair { a, b, value: v });
            }
        }
    }
    best
}

pub fn min_pairwise_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<MinPair> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need k ≥ 2 clusters, got {k}")));
    }
    let m = pairwise_matrix(pred, truth, k)?;
    min_of_matrix(&m).ok_or_else(|| Error::Infeasible("every cluster pair is undefined".into()))
}

/// Unweighted mean over the defined pairs.
pub fn mean_of_matrix(m: &Array2<f64>) -> Option<f64> {
    let k = m.nrows();
    let vals: Vec<f64> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .map(|(a, b)| m[[a, b]])
        .filter(|v| !v.is_nan())
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}
