use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Significance level of the kill test.
pub const ALPHA: f64 = 0.05;
/// Smallest |Cohen's d| that counts as a kill ("medium" effect).
pub const MIN_EFFECT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillVerdict {
    pub p_value: f64,
    /// Cohen's d of original minus mutant.
    pub effect_size: f64,
    pub killed: bool,
}

/// Two-sided Mann–Whitney U test, normal approximation with tie and
/// continuity corrections. Returns `(U of x, p)`. When every value is tied
/// the statistic has no spread and `p = 1`.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let mut all: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sum_x = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share their average
        let avg = (i + 1 + j) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        rank_sum_x += avg * all[i..j].iter().filter(|e| e.1).count() as f64;
        i = j;
    }

    let u1 = rank_sum_x - n1 * (n1 + 1.0) / 2.0;
    let u = u1.max(n1 * n2 - u1);
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return (u1, 1.0);
    }
    let z = (u - mu - 0.5) / var.sqrt();
    let sf = Normal::standard().sf(z);
    (u1, (2.0 * sf).min(1.0))
}

/// Cohen's d with the pooled standard deviation (`n₁ + n₂ − 2` divisor).
///
/// With zero pooled spread, equal means give 0 and different means give an
/// infinite effect of the matching sign: two constant, different samples
/// are as separated as samples can be.
pub fn cohens_d(x: &[f64], y: &[f64]) -> f64 {
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled = (((n1 - 1.0) * vx + (n2 - 1.0) * vy) / (n1 + n2 - 2.0)).sqrt();
    let diff = mx - my;
    if pooled > 0.0 {
        diff / pooled
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Killed when the metric samples differ significantly (p < 0.05) with at
/// least a medium effect (|d| ≥ 0.5). Both samples need two or more values.
pub fn is_killed(orig: &[f64], mutant: &[f64]) -> KillVerdict {
    assert!(
        orig.len() >= 2 && mutant.len() >= 2,
        "kill test needs at least two runs per model"
    );
    let (_, p_value) = mann_whitney_u(orig, mutant);
    let effect_size = cohens_d(orig, mutant);
    KillVerdict {
        p_value,
        effect_size,
        killed: p_value < ALPHA && effect_size.abs() >= MIN_EFFECT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples_survive() {
        let x = [0.9, 0.91, 0.92, 0.9];
        let v = is_killed(&x, &x);
        assert!(!v.killed);
        assert_eq!(v.effect_size, 0.0);
        assert_eq!(v.p_value, 1.0);
    }

    #[test]
    fn all_tied_samples_have_p_one() {
        let v = is_killed(&[0.5; 5], &[0.5; 7]);
        assert_eq!((v.p_value, v.effect_size, v.killed), (1.0, 0.0, false));
    }

    #[test]
    fn constant_but_different_samples_are_killed() {
        let v = is_killed(&[1.0; 20], &[0.0; 20]);
        assert!(v.killed);
        assert_eq!(v.effect_size, f64::INFINITY);
        assert!(v.p_value < 1e-8);
    }

    #[test]
    fn u_statistic_by_hand() {
        // x = {1, 3}, y = {2, 4, 5}: ranks of x are 1 and 3, so U = 4 − 3 = 1
        let (u, _) = mann_whitney_u(&[1.0, 3.0], &[2.0, 4.0, 5.0]);
        assert_eq!(u, 1.0);
    }

    #[test]
    fn d_by_hand() {
        // means 2 and 5, both sample variances 1, pooled sd 1
        assert!((cohens_d(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]) + 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn swapping_keeps_p_and_negates_d(
            x in prop::collection::vec(0.0f64..1.0, 2..25),
            y in prop::collection::vec(0.0f64..1.0, 2..25),
        ) {
            let a = is_killed(&x, &y);
            let b = is_killed(&y, &x);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
            prop_assert!((a.effect_size + b.effect_size).abs() < 1e-9 * (1.0 + a.effect_size.abs()));
            prop_assert_eq!(a.killed, b.killed);
            prop_assert!((0.0..=1.0).contains(&a.p_value));
        }

        #[test]
        fn verdict_follows_both_gates(
            x in prop::collection::vec(0.0f64..1.0, 2..25),
            y in prop::collection::vec(0.0f64..1.0, 2..25),
        ) {
            let v = is_killed(&x, &y);
            prop_assert_eq!(v.killed, v.p_value < 0.05 && v.effect_size.abs() >= 0.5);
        }
    }
}
