//! Single-hidden-layer perceptron: tanh hidden units, softmax output,
//! mean cross-entropy loss, mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svm::argmax;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 20,
            lr: 0.01,
            epochs: 500,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `[input, hidden, classes]`
    pub layer_sizes: [usize; 3],
    /// hidden × input
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// classes × hidden
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub seed: u64,
    /// Mean training loss after each epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

fn uniform_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let bound = 1.0 / (cols as f64).sqrt();
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-bound..bound)).collect())
        .collect()
}

impl MlpModel {
    /// Fresh model with weights and biases drawn from `±1/√fan_in`.
    pub fn init(input: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(input, hidden, classes, seed, &mut rng)
    }

    fn init_with(
        input: usize,
        hidden: usize,
        classes: usize,
        seed: u64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let w1 = uniform_matrix(hidden, input, rng);
        let bound = 1.0 / (input as f64).sqrt();
        let b1 = (0..hidden)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let w2 = uniform_matrix(classes, hidden, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let b2 = (0..classes)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        MlpModel {
            layer_sizes: [input, hidden, classes],
            w1,
            b1,
            w2,
            b2,
            seed,
            loss_history: Vec::new(),
        }
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(w, b)| (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b).tanh())
            .collect()
    }

    fn output(&self, h: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .w2
            .iter()
            .zip(&self.b2)
            .map(|(w, b)| w.iter().zip(h).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect();
        softmax(&logits)
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.layer_sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.layer_sizes[0],
                actual: row.len(),
            });
        }
        Ok(())
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_row(row)?;
        Ok(self.output(&self.hidden(row)))
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba_row(row)?))
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn cross_entropy(p: &[f64], label: usize) -> f64 {
    -p[label].max(f64::MIN_POSITIVE).ln()
}

/// Mean cross-entropy over `rows`.
pub fn mlp_loss(m: &MlpModel, rows: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        total += cross_entropy(&m.predict_proba_row(x)?, y);
    }
    Ok(total / rows.len().max(1) as f64)
}

/// Mean cross-entropy over `rows` and its gradient by backpropagation.
pub fn loss_and_gradients(
    m: &MlpModel,
    rows: &[Vec<f64>],
    labels: &[usize],
) -> Result<(f64, MlpGradients)> {
    let [input, hidden, classes] = m.layer_sizes;
    let mut g = MlpGradients {
        w1: vec![vec![0.0; input]; hidden],
        b1: vec![0.0; hidden],
        w2: vec![vec![0.0; hidden]; classes],
        b2: vec![0.0; classes],
    };
    let mut loss = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        m.check_row(x)?;
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        let h = m.hidden(x);
        let p = m.output(&h);
        loss += cross_entropy(&p, y);

        // dL/dlogit = p − onehot(y)
        let mut delta_out = p;
        delta_out[y] -= 1.0;
        let mut delta_hidden = vec![0.0; hidden];
        for (c, d) in delta_out.iter().enumerate() {
            g.b2[c] += d;
            for j in 0..hidden {
                g.w2[c][j] += d * h[j];
                delta_hidden[j] += d * m.w2[c][j];
            }
        }
        for j in 0..hidden {
            let dz = delta_hidden[j] * (1.0 - h[j] * h[j]);
            g.b1[j] += dz;
            for (gw, xi) in g.w1[j].iter_mut().zip(x) {
                *gw += dz * xi;
            }
        }
    }
    let n = rows.len().max(1) as f64;
    let scale = |v: &mut f64| *v /= n;
    g.w1.iter_mut().flatten().for_each(scale);
    g.b1.iter_mut().for_each(scale);
    g.w2.iter_mut().flatten().for_each(scale);
    g.b2.iter_mut().for_each(scale);
    Ok((loss / n, g))
}

fn step(m: &mut MlpModel, g: &MlpGradients, lr: f64) {
    let upd = |w: &mut f64, d: &f64| *w -= lr * d;
    m.w1.iter_mut()
        .flatten()
        .zip(g.w1.iter().flatten())
        .for_each(|(w, d)| upd(w, d));
    m.b1.iter_mut().zip(&g.b1).for_each(|(w, d)| upd(w, d));
    m.w2.iter_mut()
        .flatten()
        .zip(g.w2.iter().flatten())
        .for_each(|(w, d)| upd(w, d));
    m.b2.iter_mut().zip(&g.b2).for_each(|(w, d)| upd(w, d));
}

pub fn train_mlp(train: &FeatureMatrix, params: &MlpParams, seed: u64) -> Result<MlpModel> {
    fit_rows(
        train.values(),
        train.labels(),
        train.class_count(),
        params,
        seed,
    )
}

pub(crate) fn fit_rows(
    rows: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    params: &MlpParams,
    seed: u64,
) -> Result<MlpModel> {
    if params.hidden == 0 {
        return Err(Error::InvalidParameter(
            "hidden layer needs at least one unit".into(),
        ));
    }
    if params.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be ≥ 1".into()));
    }
    if !(params.lr > 0.0 && params.lr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be positive, got {}",
            params.lr
        )));
    }
    let first = *labels.first().ok_or(Error::EmptyInput)?;
    if class_count < 2 || labels.iter().all(|&l| l == first) {
        return Err(Error::SingleClass);
    }
    let input = rows[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::init_with(input, params.hidden, class_count, seed, &mut rng);

    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let xb: Vec<Vec<f64>> = batch.iter().map(|&i| rows[i].clone()).collect();
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (_, g) = loss_and_gradients(&model, &xb, &yb)?;
            step(&mut model, &g, params.lr);
        }
        history.push(mlp_loss(&model, rows, labels)?);
    }
    model.loss_history = history;
    Ok(model)
}

pub fn predict_mlp(m: &MlpModel, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    rows.iter().map(|r| m.predict_row(r)).collect()
}
