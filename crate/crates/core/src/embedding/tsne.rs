//! Exact t-SNE (quadratic in the number of rows).
//!
//! Optimization follows the usual reference schedule: early exaggeration 12
//! for the first 250 iterations, learning rate 200, momentum 0.5 switching to
//! 0.8 at iteration 250, and per-coordinate adaptive gains.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::EmbeddedSet;
use crate::error::{Error, Result};

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const LEARNING_RATE: f64 = 200.0;
const MOMENTUM_EARLY: f64 = 0.5;
const MOMENTUM_LATE: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneParams {
    pub out_dim: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            out_dim: 2,
            perplexity: 30.0,
            iterations: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TsneFit {
    pub embedding: EmbeddedSet,
    /// KL(P‖Q) at the random initialization.
    pub initial_kl: f64,
    pub final_kl: f64,
}

fn squared_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Conditional row distribution for precision `beta`; returns the entropy
/// (nats) and fills `row`.
fn conditional_row(dist: &[f64], i: usize, beta: f64, row: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, p) in row.iter_mut().enumerate() {
        *p = if j == i {
            0.0
        } else {
            (-(dist[j] - min) * beta).exp()
        };
        sum += *p;
    }
    let mut h = 0.0;
    for (j, p) in row.iter_mut().enumerate() {
        if j == i {
            continue;
        }
        *p /= sum;
        // H = log(sum) + beta * E[d − min]
        h += *p * (dist[j] - min);
    }
    sum.ln() + beta * h
}

/// Symmetrized input affinities P for the given perplexity.
pub fn joint_probabilities(x: ArrayView2<'_, f64>, perplexity: f64) -> Array2<f64> {
    let n = x.nrows();
    let dist = squared_distances(x);
    let target = perplexity.ln();
    let mut p = Array2::<f64>::zeros((n, n));
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d = dist.row(i).to_vec();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut beta = 1.0;
        for _ in 0..200 {
            let h = conditional_row(&d, i, beta, &mut row);
            let diff = h - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
        }
        for j in 0..n {
            p[[i, j]] = row[j];
        }
    }
    let sym = (&p + &p.t()) / (2.0 * n as f64);
    sym.mapv(|v| v.max(P_FLOOR))
}

/// Student-t affinities: returns the unnormalized kernel matrix and its sum.
fn student_kernel(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let mut num = Array2::<f64>::zeros((n, n));
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = y
                .row(i)
                .iter()
                .zip(y.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let k = 1.0 / (1.0 + d);
            num[[i, j]] = k;
            num[[j, i]] = k;
            sum += 2.0 * k;
        }
    }
    (num, sum)
}

/// KL(P‖Q) for an embedding `y` under input affinities `p`.
pub fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (num, sum) = student_kernel(y);
    let n = p.nrows();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let q = (num[[i, j]] / sum).max(P_FLOOR);
            let pij = p[[i, j]];
            kl += pij * (pij / q).ln();
        }
    }
    kl
}

pub fn fit_tsne(x: ArrayView2<'_, f64>, params: TsneParams) -> Result<TsneFit> {
    let n = x.nrows();
    if !(2..=3).contains(&params.out_dim) {
        return Err(Error::InvalidInput(format!(
            "t-SNE output dimension must be 2 or 3, got {}",
            params.out_dim
        )));
    }
    if !(params.perplexity > 0.0) || (n as f64) < 3.0 * params.perplexity {
        return Err(Error::Infeasible(format!(
            "perplexity {} needs at least {} rows, dataset has {n}",
            params.perplexity,
            (3.0 * params.perplexity).ceil()
        )));
    }
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }

    let p = joint_probabilities(x, params.perplexity);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let dim = params.out_dim;
    let mut y = Array2::from_shape_simple_fn((n, dim), || init.sample(&mut rng));
    let initial_kl = kl_divergence(&p, &y);

    let mut update = Array2::<f64>::zeros((n, dim));
    let mut gains = Array2::<f64>::ones((n, dim));
    let mut grad = Array2::<f64>::zeros((n, dim));
    for iter in 0..params.iterations {
        let exaggeration = if iter < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if iter < EXAGGERATION_ITERS { MOMENTUM_EARLY } else { MOMENTUM_LATE };

        let (num, sum) = student_kernel(&y);
        grad.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = num[[i, j]];
                let coeff = 4.0 * (exaggeration * p[[i, j]] - k / sum) * k;
                for c in 0..dim {
                    grad[[i, c]] += coeff * (y[[i, c]] - y[[j, c]]);
                }
            }
        }

        for ((g, u), gain) in grad.iter().zip(update.iter_mut()).zip(gains.iter_mut()) {
            *gain = if (*g > 0.0) != (*u > 0.0) {
                *gain + 0.2
            } else {
                *gain * 0.8
            }
            .max(MIN_GAIN);
            *u = momentum * *u - LEARNING_RATE * *gain * g;
        }
        y += &update;
        let mean = y.mean_axis(ndarray::Axis(0)).expect("n > 0");
        y -= &mean;
    }

    let final_kl = kl_divergence(&p, &y);
    Ok(TsneFit {
        embedding: EmbeddedSet::new(y)?,
        initial_kl,
        final_kl,
    })
}
