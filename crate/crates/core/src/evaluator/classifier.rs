//! Feed-forward pseudo-label classifier trained with class-weighted
//! cross-entropy, Adam and early stopping on validation loss.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Training hyperparameters. Class weights are not configured here: they are
/// derived from the pseudo-label counts at training time (see
/// [`class_weights`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            hidden_layers: vec![128, 64],
            activation: Activation::Relu,
            epochs: 50,
            batch: 64,
            learning_rate: 1e-3,
            early_stop_patience: 5,
            seed: 0,
        }
    }
}

impl ClassifierSpec {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidInput("epochs and batch must be positive".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidInput("hidden layer widths must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// `total / (k · count(c))` for every label present, keyed by label, where
/// `k` is the number of distinct labels.
pub fn class_weights(labels: &[usize]) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let k = counts.len() as f64;
    let total = labels.len() as f64;
    counts
        .into_iter()
        .map(|(c, n)| (c, total / (k * n as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    w: Array2<f64>,
    b: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub train: f64,
    pub valid: Option<f64>,
}

/// A trained network. Outputs index into `classes`, the sorted set of
/// pseudo-labels seen in training.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub classes: Vec<usize>,
    /// Aligned with `classes`.
    pub class_weights: Vec<f64>,
    pub history: Vec<EpochLoss>,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
    mean: Array1<f64>,
    scale: Array1<f64>,
    layers: Vec<Dense>,
    activation: Activation,
}

impl ClassifierModel {
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.ncols(),
            });
        }
        let xs = (&x - &self.mean) / &self.scale;
        let acts = forward(&self.layers, self.activation, xs);
        Ok(acts.into_iter().last().expect("output layer"))
    }

    /// Most probable pseudo-label per row; ties go to the smaller label.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows()
            .into_iter()
            .map(|r| {
                let mut best = 0;
                for (j, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = j;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}

/// Trains on the dataset's training rows against `pseudo_labels` (one per
/// dataset row) and early-stops on the validation rows.
pub fn train_classifier(
    dataset: &Dataset,
    pseudo_labels: &[usize],
    spec: &ClassifierSpec,
) -> Result<ClassifierModel> {
    if pseudo_labels.len() != dataset.n_rows() {
        return Err(Error::RowCountMismatch {
            what: "pseudo-labels".into(),
            expected: dataset.n_rows(),
            found: pseudo_labels.len(),
        });
    }
    let idx = dataset.split_index();
    let pick = |rows: &[usize]| rows.iter().map(|&r| pseudo_labels[r]).collect::<Vec<_>>();
    fit_mlp(
        dataset.select_rows(&idx.train).view(),
        &pick(&idx.train),
        dataset.select_rows(&idx.valid).view(),
        &pick(&idx.valid),
        spec,
    )
}

/// Trains on explicit matrices. Validation rows whose label never occurs in
/// training are ignored (such clusters are dropped from the label set).
pub fn fit_mlp(
    x_train: ArrayView2<'_, f64>,
    y_train: &[usize],
    x_valid: ArrayView2<'_, f64>,
    y_valid: &[usize],
    spec: &ClassifierSpec,
) -> Result<ClassifierModel> {
    spec.validate()?;
    if x_train.nrows() != y_train.len() || x_valid.nrows() != y_valid.len() {
        return Err(Error::RowCountMismatch {
            what: "classifier labels".into(),
            expected: x_train.nrows() + x_valid.nrows(),
            found: y_train.len() + y_valid.len(),
        });
    }
    if x_valid.nrows() > 0 && x_valid.ncols() != x_train.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x_train.ncols(),
            found: x_valid.ncols(),
        });
    }
    let weights = class_weights(y_train);
    if weights.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pseudo-labels cover {} cluster(s) on the training rows; need at least 2",
            weights.len()
        )));
    }
    let classes: Vec<usize> = weights.keys().copied().collect();
    let slot: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let w_of: Vec<f64> = weights.values().copied().collect();

    let train_y: Vec<usize> = y_train.iter().map(|l| slot[l]).collect();
    let mut valid_rows = Vec::new();
    let mut valid_y = Vec::new();
    let mut dropped = 0;
    for (i, l) in y_valid.iter().enumerate() {
        match slot.get(l) {
            Some(&s) => {
                valid_rows.push(i);
                valid_y.push(s);
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} validation rows carry pseudo-labels absent from training; ignored");
    }

    let mean = x_train.mean_axis(Axis(0)).expect("training rows present");
    let scale = x_train
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let xt = (&x_train - &mean) / &scale;
    let xv = (&x_valid.select(Axis(0), &valid_rows) - &mean) / &scale;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut widths = vec![xt.ncols()];
    widths.extend(&spec.hidden_layers);
    widths.push(classes.len());
    let mut layers = init_layers(&widths, spec.activation, &mut rng);

    let mut adam = Adam::new(&layers, spec.learning_rate);
    let mut order: Vec<usize> = (0..xt.nrows()).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    let mut best = (f64::INFINITY, 0, layers.clone());
    let mut stale = 0;

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(spec.batch) {
            let xb = xt.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&r| train_y[r]).collect();
            let (loss, grads) = backprop(&layers, spec.activation, xb, &yb, &w_of);
            sum += loss * chunk.len() as f64;
            adam.step(&mut layers, &grads);
        }
        let train = sum / xt.nrows() as f64;
        let valid = (!valid_y.is_empty())
            .then(|| weighted_loss(&forward_output(&layers, spec.activation, xv.clone()), &valid_y, &w_of));
        history.push(EpochLoss { train, valid });

        // without validation rows the training loss is monitored instead
        let monitored = valid.unwrap_or(train);
        if monitored < best.0 {
            best = (monitored, epoch, layers.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= spec.early_stop_patience {
                break;
            }
        }
    }

    Ok(ClassifierModel {
        classes,
        class_weights: w_of,
        history,
        best_epoch: best.1,
        mean,
        scale,
        layers: best.2,
        activation: spec.activation,
    })
}

fn init_layers(widths: &[usize], act: Activation, rng: &mut ChaCha8Rng) -> Vec<Dense> {
    let last = widths.len() - 2;
    widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let (fan_in, fan_out) = (w[0] as f64, w[1] as f64);
            let sd = if l == last {
                (2.0 / (fan_in + fan_out)).sqrt()
            } else {
                match act {
                    Activation::Relu => (2.0 / fan_in).sqrt(),
                    Activation::Tanh => (1.0 / fan_in).sqrt(),
                }
            };
            let normal = Normal::new(0.0, sd).expect("positive sd");
            Dense {
                w: Array2::from_shape_simple_fn((w[0], w[1]), || normal.sample(rng)),
                b: Array1::zeros(w[1]),
            }
        })
        .collect()
}

/// Activations of every layer, input first and softmax output last.
fn forward(layers: &[Dense], act: Activation, x: Array2<f64>) -> Vec<Array2<f64>> {
    let mut acts = vec![x];
    for (l, layer) in layers.iter().enumerate() {
        let mut z = acts[l].dot(&layer.w) + &layer.b;
        if l + 1 < layers.len() {
            act.apply(&mut z);
        } else {
            softmax_rows(&mut z);
        }
        acts.push(z);
    }
    acts
}

fn forward_output(layers: &[Dense], act: Activation, x: Array2<f64>) -> Array2<f64> {
    forward(layers, act, x).pop().expect("output layer")
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Mean over rows of `weight(y) · −ln p(y)`.
fn weighted_loss(p: &Array2<f64>, y: &[usize], w: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &c)| -w[c] * p[[i, c]].max(1e-300).ln())
        .sum();
    total / y.len() as f64
}

fn backprop(
    layers: &[Dense],
    act: Activation,
    x: Array2<f64>,
    y: &[usize],
    w: &[f64],
) -> (f64, Vec<Dense>) {
    let acts = forward(layers, act, x);
    let out = acts.last().expect("output layer");
    let loss = weighted_loss(out, y, w);
    let n = y.len() as f64;

    let mut delta = out.clone();
    for (i, &c) in y.iter().enumerate() {
        delta[[i, c]] -= 1.0;
        let scale = w[c] / n;
        delta.row_mut(i).mapv_inplace(|v| v * scale);
    }

    let mut grads = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let input = &acts[l];
        let gw = input.t().dot(&delta);
        let gb = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut next = delta.dot(&layers[l].w.t());
            next.zip_mut_with(input, |d, &a| *d *= act.grad_from_output(a));
            delta = next;
        }
        grads.push(Dense { w: gw, b: gb });
    }
    grads.reverse();
    (loss, grads)
}

struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-7;

    fn new(layers: &[Dense], lr: f64) -> Self {
        let zeros = || {
            layers
                .iter()
                .map(|d| Dense {
                    w: Array2::zeros(d.w.raw_dim()),
                    b: Array1::zeros(d.b.raw_dim()),
                })
                .collect::<Vec<_>>()
        };
        Adam {
            lr,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    fn step(&mut self, layers: &mut [Dense], grads: &[Dense]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (((layer, g), m), v) in layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut layer.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&g.w)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&g.b)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}
