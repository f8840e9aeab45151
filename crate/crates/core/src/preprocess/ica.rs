//! Square FastICA with symmetric decorrelation.
//!
//! Data are demeaned, whitened through the eigendecomposition of their
//! covariance, then rotated by the fixed-point update
//! `W ← E[g(WZ)Zᵀ] − diag(E[g'(WZ)])·W` followed by `W ← (WWᵀ)^{-1/2}W`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::pearson;
use crate::signal::Recording;

/// Smallest allowed covariance eigenvalue relative to the largest.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Tanh,
    Cube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcaConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub nonlinearity: Nonlinearity,
    pub seed: u64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig {
            max_iterations: 1000,
            tolerance: 1e-6,
            nonlinearity: Nonlinearity::Tanh,
            seed: 0,
        }
    }
}

impl IcaConfig {
    pub fn check(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be ≥ 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Fitted decomposition. Matrices are stored row-major as nested vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaModel {
    /// W, components × channels.
    pub unmixing: Vec<Vec<f64>>,
    /// A, channels × components.
    pub mixing: Vec<Vec<f64>>,
    /// S, components × samples.
    pub activations: Vec<Vec<f64>>,
    pub channel_means: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl IcaModel {
    pub fn n_components(&self) -> usize {
        self.unmixing.len()
    }

    pub fn n_samples(&self) -> usize {
        self.activations.first().map_or(0, Vec::len)
    }

    /// `max |(W·A − I)_{ij}|`.
    pub fn unmixing_identity_error(&self) -> f64 {
        let w = to_matrix(&self.unmixing);
        let a = to_matrix(&self.mixing);
        let n = w.nrows();
        (w * a - DMatrix::identity(n, n)).amax()
    }

    /// Mix activations back into channel space, skipping the listed components.
    pub fn reconstruct(&self, rejected: &[usize]) -> Result<Vec<Vec<f64>>> {
        let n = self.n_components();
        if let Some(&index) = rejected.iter().find(|&&i| i >= n) {
            return Err(Error::ComponentOutOfRange { index, count: n });
        }
        let mut s = to_matrix(&self.activations);
        for &i in rejected {
            s.row_mut(i).fill(0.0);
        }
        let x = to_matrix(&self.mixing) * s;
        Ok(from_matrix(&x)
            .into_iter()
            .zip(&self.channel_means)
            .map(|(row, m)| row.into_iter().map(|v| v + m).collect())
            .collect())
    }

    /// `‖A·S + means − X‖_F / ‖X‖_F`.
    pub fn reconstruction_error(&self, data: &[Vec<f64>]) -> f64 {
        let Ok(rec) = self.reconstruct(&[]) else {
            return f64::INFINITY;
        };
        let (mut num, mut den) = (0.0, 0.0);
        for (r, x) in rec.iter().zip(data) {
            for (a, b) in r.iter().zip(x) {
                num += (a - b) * (a - b);
                den += b * b;
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

pub(crate) fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Demeaned data mapped to identity covariance.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub means: DVector<f64>,
    /// K = D^{-1/2}·Eᵀ
    pub whitening: DMatrix<f64>,
    /// K⁻¹ = E·D^{1/2}
    pub dewhitening: DMatrix<f64>,
    /// Z = K·(X − means)
    pub whitened: DMatrix<f64>,
}

impl Whitening {
    pub fn whitened_covariance(&self) -> DMatrix<f64> {
        let t = self.whitened.ncols() as f64;
        &self.whitened * self.whitened.transpose() / t
    }
}

pub fn whiten(data: &[Vec<f64>]) -> Result<Whitening> {
    let x = to_matrix(data);
    let (n, t) = x.shape();
    if n == 0 || t <= n {
        return Err(Error::InvalidParameter(format!(
            "ICA needs more samples than channels (got {n} channels, {t} samples)"
        )));
    }
    let means = x.column_mean();
    let mut xc = x;
    for mut col in xc.column_iter_mut() {
        col -= &means;
    }
    let cov = &xc * xc.transpose() / t as f64;
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min < RANK_TOLERANCE * max {
        return Err(Error::RankDeficient {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|d| 1.0 / d.sqrt()));
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let whitening = &inv_sqrt * eig.eigenvectors.transpose();
    let dewhitening = &eig.eigenvectors * sqrt;
    let whitened = &whitening * &xc;
    Ok(Whitening {
        means,
        whitening,
        dewhitening,
        whitened,
    })
}

/// `(WWᵀ)^{-1/2}·W`
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|d| 1.0 / d.max(f64::MIN_POSITIVE).sqrt()),
    );
    &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

fn fixed_point_update(w: &DMatrix<f64>, z: &DMatrix<f64>, g: Nonlinearity) -> DMatrix<f64> {
    let t = z.ncols() as f64;
    let mut y = w * z;
    let mut mean_dg = DVector::zeros(w.nrows());
    for (i, mut row) in y.row_iter_mut().enumerate() {
        let mut acc = 0.0;
        for v in row.iter_mut() {
            let u = *v;
            match g {
                Nonlinearity::Tanh => {
                    let th = u.tanh();
                    *v = th;
                    acc += 1.0 - th * th;
                }
                Nonlinearity::Cube => {
                    *v = u * u * u;
                    acc += 3.0 * u * u;
                }
            }
        }
        mean_dg[i] = acc / t;
    }
    y * z.transpose() / t - DMatrix::from_diagonal(&mean_dg) * w
}

pub fn fast_ica(r: &Recording, cfg: &IcaConfig) -> Result<IcaModel> {
    fast_ica_data(r.data(), cfg)
}

pub fn fast_ica_data(data: &[Vec<f64>], cfg: &IcaConfig) -> Result<IcaModel> {
    cfg.check()?;
    let wh = whiten(data)?;
    let n = wh.whitened.nrows();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let next = symmetric_decorrelation(&fixed_point_update(&w, &wh.whitened, cfg.nonlinearity));
        // rows are unit vectors; |⟨w_new, w_old⟩| = 1 means no change up to sign
        let change = (0..n)
            .map(|i| (next.row(i).dot(&w.row(i)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let unmixing = &w * &wh.whitening;
    let mixing = &wh.dewhitening * w.transpose();
    let activations = &w * &wh.whitened;
    Ok(IcaModel {
        unmixing: from_matrix(&unmixing),
        mixing: from_matrix(&mixing),
        activations: from_matrix(&activations),
        channel_means: wh.means.iter().copied().collect(),
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub component_index: usize,
    pub abs_correlation: f64,
    /// Set when either series was constant; the score is then 0.
    pub constant_series: bool,
}

/// `|r|` of every activation against `reference`, strongest first.
pub fn score_components(m: &IcaModel, reference: &[f64]) -> Result<Vec<ComponentScore>> {
    if reference.len() != m.n_samples() {
        return Err(Error::LengthMismatch {
            expected: m.n_samples(),
            actual: reference.len(),
        });
    }
    let mut scores: Vec<ComponentScore> = m
        .activations
        .iter()
        .enumerate()
        .map(|(i, s)| match pearson(s, reference) {
            Some(r) => ComponentScore {
                component_index: i,
                abs_correlation: r.abs().min(1.0),
                constant_series: false,
            },
            None => ComponentScore {
                component_index: i,
                abs_correlation: 0.0,
                constant_series: true,
            },
        })
        .collect();
    scores.sort_by(|a, b| {
        b.abs_correlation
            .total_cmp(&a.abs_correlation)
            .then(a.component_index.cmp(&b.component_index))
    });
    Ok(scores)
}

/// Components scoring strictly above `threshold`, plus `manual`, sorted and deduplicated.
pub fn select_rejections(
    scores: &[ComponentScore],
    threshold: f64,
    manual: &[usize],
) -> Vec<usize> {
    let mut out: Vec<usize> = scores
        .iter()
        .filter(|s| s.abs_correlation > threshold)
        .map(|s| s.component_index)
        .chain(manual.iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Remix `m` with the listed component activations zeroed.
pub fn reject_components(r: &Recording, m: &IcaModel, indices: &[usize]) -> Result<Recording> {
    if r.n_channels() != m.mixing.len() || r.n_samples() != m.n_samples() {
        return Err(Error::InvalidParameter(format!(
            "model was fitted on {}×{} data, recording is {}×{}",
            m.mixing.len(),
            m.n_samples(),
            r.n_channels(),
            r.n_samples()
        )));
    }
    r.with_data(m.reconstruct(indices)?)
}

pub fn demean(r: &Recording) -> Recording {
    let data = r
        .data()
        .iter()
        .map(|row| {
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter().map(|v| v - mean).collect()
        })
        .collect();
    r.with_data(data).expect("shape unchanged")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::channel_names;
    use rand::Rng;

    fn rec(data: Vec<Vec<f64>>) -> Recording {
        let names: Vec<String> = (0..data.len()).map(|i| format!("ch{i}")).collect();
        Recording::new(250.0, channel_names(&names).unwrap(), data).unwrap()
    }

    fn noise(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect()
    }

    #[test]
    fn demean_examples() {
        let r = rec(vec![vec![5.0; 4], vec![1.0, 2.0, 3.0, 2.0]]);
        let d = demean(&r);
        assert_eq!(d.data()[0], vec![0.0; 4]);
        assert_eq!(d.data()[1], vec![-1.0, 0.0, 1.0, 0.0]);
        let again = demean(&d);
        for (a, b) in again.data().iter().flatten().zip(d.data().iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_noise_satisfies_invariants() {
        let data = noise(4, 3000, 3);
        let m = fast_ica(&rec(data.clone()), &IcaConfig::default()).unwrap();
        assert!(m.unmixing_identity_error() < 1e-6);
        assert!(m.reconstruction_error(&data) < 1e-6);
        assert_eq!(m.activations.len(), 4);
    }

    #[test]
    fn duplicate_channels_are_rank_deficient() {
        let row = noise(1, 500, 9).remove(0);
        let r = rec(vec![row.clone(), row]);
        assert!(matches!(
            fast_ica(&r, &IcaConfig::default()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn too_few_samples() {
        let r = rec(noise(4, 4, 1));
        assert!(matches!(
            fast_ica(&r, &IcaConfig::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let mut data = noise(3, 2000, 5);
        for v in data[2].iter_mut() {
            *v *= 40.0;
        }
        let mixed: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..2000)
                    .map(|t| {
                        data[0][t] + (i as f64) * data[1][t] + 0.3 * ((i * i) as f64) * data[2][t]
                    })
                    .collect()
            })
            .collect();
        let wh = whiten(&mixed).unwrap();
        let c = wh.whitened_covariance();
        assert!((c - DMatrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn single_iteration_budget_flags_non_convergence() {
        let data = noise(3, 2000, 11);
        let cfg = IcaConfig {
            max_iterations: 1,
            ..IcaConfig::default()
        };
        let m = fast_ica_data(&data, &cfg).unwrap();
        assert_eq!(m.iterations, 1);
        assert!(!m.converged);
        assert!(m.unmixing_identity_error() < 1e-6);
    }

    #[test]
    fn invalid_config() {
        let data = noise(2, 100, 1);
        for cfg in [
            IcaConfig {
                max_iterations: 0,
                ..IcaConfig::default()
            },
            IcaConfig {
                tolerance: 1.0,
                ..IcaConfig::default()
            },
        ] {
            assert!(fast_ica_data(&data, &cfg).is_err());
        }
    }

    #[test]
    fn scoring_examples() {
        let data = noise(3, 1000, 21);
        let m = fast_ica_data(&data, &IcaConfig::default()).unwrap();

        let self_ref = m.activations[1].clone();
        let scores = score_components(&m, &self_ref).unwrap();
        assert_eq!(scores[0].component_index, 1);
        assert!((scores[0].abs_correlation - 1.0).abs() < 1e-12);
        assert!(scores
            .windows(2)
            .all(|w| w[0].abs_correlation >= w[1].abs_correlation));

        let flat = score_components(&m, &vec![3.0; 1000]).unwrap();
        assert!(flat
            .iter()
            .all(|s| s.abs_correlation == 0.0 && s.constant_series));

        assert!(matches!(
            score_components(&m, &[0.0; 10]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rejection_examples() {
        let data = noise(3, 1500, 4);
        let r = rec(data.clone());
        let m = fast_ica(&r, &IcaConfig::default()).unwrap();

        let same = reject_components(&r, &m, &[]).unwrap();
        let err: f64 = same
            .data()
            .iter()
            .flatten()
            .zip(data.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = data.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-6);

        let flat = reject_components(&r, &m, &[0, 1, 2]).unwrap();
        for (row, mean) in flat.data().iter().zip(&m.channel_means) {
            assert!(row.iter().all(|v| (v - mean).abs() < 1e-9));
        }

        assert!(matches!(
            reject_components(&r, &m, &[3]),
            Err(Error::ComponentOutOfRange { index: 3, count: 3 })
        ));
    }

    #[test]
    fn selection_merges_threshold_and_manual() {
        let s = |i, a| ComponentScore {
            component_index: i,
            abs_correlation: a,
            constant_series: false,
        };
        let scores = [s(2, 0.9), s(0, 0.71), s(1, 0.7)];
        assert_eq!(select_rejections(&scores, 0.7, &[4, 2]), vec![0, 2, 4]);
    }
}
