use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted.
    pub confusion: Vec<Vec<usize>>,
    /// 0 for classes absent from the truth labels.
    pub per_class_recall: Vec<f64>,
}

pub fn evaluate(pred: &[usize], truth: &[usize], k: usize) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if let Some(&label) = [p, t].iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        confusion[t][p] += 1;
    }
    let total = truth.len();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let per_class_recall = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: usize = row.iter().sum();
            if n == 0 {
                0.0
            } else {
                row[c] as f64 / n as f64
            }
        })
        .collect();
    Ok(Metrics {
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        confusion,
        per_class_recall,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle `0..n` with `seed` and cut it into `folds` contiguous test blocks
/// whose sizes differ by at most one.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidParameter(format!(
            "fold count {folds} must lie in 2..={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let test = order[start..start + len].to_vec();
        let train = order[..start]
            .iter()
            .chain(&order[start + len..])
            .copied()
            .collect();
        out.push(Fold { train, test });
        start += len;
    }
    Ok(out)
}
