use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub class_count: usize,
}

pub fn train_knn(train: &FeatureMatrix, k: usize) -> Result<KnnModel> {
    fit_rows(train.values(), train.labels(), train.class_count(), k)
}

pub(crate) fn fit_rows(
    rows: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    k: usize,
) -> Result<KnnModel> {
    if k == 0 || k > rows.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in 1..={}",
            rows.len()
        )));
    }
    Ok(KnnModel {
        rows: rows.to_vec(),
        labels: labels.to_vec(),
        k,
        class_count,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl KnnModel {
    fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Majority vote of the k nearest rows; ties go to the smaller summed
    /// distance, then the lower label.
    pub fn predict_row(&self, query: &[f64]) -> Result<usize> {
        if query.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: query.len(),
            });
        }
        let mut order: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (distance(r, query), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut votes = vec![0usize; self.class_count];
        let mut dist_sum = vec![0.0; self.class_count];
        for &(d, i) in &order[..self.k] {
            votes[self.labels[i]] += 1;
            dist_sum[self.labels[i]] += d;
        }
        let best = (0..self.class_count)
            .filter(|&c| votes[c] > 0)
            .min_by(|&a, &b| {
                votes[b]
                    .cmp(&votes[a])
                    .then(dist_sum[a].total_cmp(&dist_sum[b]))
                    .then(a.cmp(&b))
            })
            .expect("k ≥ 1 neighbours vote");
        Ok(best)
    }
}

pub fn predict_knn(m: &KnnModel, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    rows.iter().map(|r| m.predict_row(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> FeatureMatrix {
        FeatureMatrix::new(rows, vec!["x".into(), "y".into()], labels, 2).unwrap()
    }

    #[test]
    fn exact_match_with_k1() {
        let m = train_knn(&matrix(vec![vec![0.0, 0.0], vec![3.0, 4.0]], vec![0, 1]), 1).unwrap();
        assert_eq!(predict_knn(&m, &[vec![3.0, 4.0]]).unwrap(), vec![1]);
    }

    #[test]
    fn two_blobs() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.5, 0.0],
            vec![0.0, 0.5],
            vec![10.0, 10.0],
            vec![10.5, 10.0],
            vec![10.0, 10.5],
        ];
        let m = train_knn(&matrix(rows, vec![0, 0, 0, 1, 1, 1]), 3).unwrap();
        assert_eq!(m.predict_row(&[1.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn full_vote_tie_uses_distance_then_label() {
        // two points per class, query nearer to class 1
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![4.0, 0.0],
            vec![4.0, 1.0],
        ];
        let m = train_knn(&matrix(rows.clone(), vec![0, 0, 1, 1]), 4).unwrap();
        assert_eq!(m.predict_row(&[3.0, 0.5]).unwrap(), 1);
        assert_eq!(m.predict_row(&[1.0, 0.5]).unwrap(), 0);
        // equidistant: lower label wins
        assert_eq!(m.predict_row(&[2.0, 0.5]).unwrap(), 0);
    }

    #[test]
    fn parameter_errors() {
        let fm = matrix(vec![vec![0.0, 0.0]], vec![0]);
        assert!(train_knn(&fm, 0).is_err());
        assert!(train_knn(&fm, 2).is_err());
        let m = train_knn(&fm, 1).unwrap();
        assert!(matches!(
            m.predict_row(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
