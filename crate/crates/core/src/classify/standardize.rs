use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Per-column z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance columns store 1.
    pub stds: Vec<f64>,
    pub constant_columns: Vec<usize>,
}

pub fn fit_standardizer(train: &FeatureMatrix) -> Result<Standardizer> {
    fit_rows(train.values(), train.n_features())
}

pub(crate) fn fit_rows(rows: &[Vec<f64>], n_features: usize) -> Result<Standardizer> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = rows.len() as f64;
    let mut means = vec![0.0; n_features];
    for row in rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; n_features];
    for row in rows {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let mut constant_columns = Vec::new();
    let stds = vars
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let sd = (s / n).sqrt();
            // relative test so rounding noise on a constant column is caught
            if sd <= 1e-12 * means[j].abs().max(f64::MIN_POSITIVE) || sd == 0.0 {
                constant_columns.push(j);
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(Standardizer {
        means,
        stds,
        constant_columns,
    })
}

impl Standardizer {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .enumerate()
            .map(|(j, ((v, m), s))| {
                if self.constant_columns.binary_search(&j).is_ok() {
                    0.0
                } else {
                    (v - m) / s
                }
            })
            .collect())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}
