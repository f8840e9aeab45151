//! One-vs-rest linear SVM trained in the primal with the Pegasos schedule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-3,
            epochs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One hyperplane per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

pub fn train_svm(train: &FeatureMatrix, lambda: f64, epochs: usize, seed: u64) -> Result<SvmModel> {
    fit_rows(
        train.values(),
        train.labels(),
        train.class_count(),
        lambda,
        epochs,
        seed,
    )
}

pub(crate) fn fit_rows(
    rows: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<SvmModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let first = *labels.first().ok_or(Error::EmptyInput)?;
    if labels.iter().all(|&l| l == first) || class_count < 2 {
        return Err(Error::SingleClass);
    }
    let dim = rows[0].len();
    let radius = 1.0 / lambda.sqrt();

    let mut weights = Vec::with_capacity(class_count);
    let mut biases = Vec::with_capacity(class_count);
    for class in 0..class_count {
        // bias is the weight of a constant 1 input, so it is regularized too
        let mut w = vec![0.0; dim + 1];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut t = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let y = if labels[i] == class { 1.0 } else { -1.0 };
                let x = &rows[i];
                let margin = y * (w[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[dim]);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj += eta * y * xj;
                    }
                    w[dim] += eta * y;
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    let s = radius / norm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        biases.push(w.pop().unwrap());
        weights.push(w);
    }
    Ok(SvmModel {
        weights,
        biases,
        lambda,
        epochs,
        seed,
    })
}

impl SvmModel {
    pub fn class_scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        let dim = self.weights[0].len();
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<usize> {
        let s = self.class_scores(row)?;
        Ok(argmax(&s))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        })
        .0
}

pub fn predict_svm(m: &SvmModel, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    rows.iter().map(|r| m.predict_row(r)).collect()
}
