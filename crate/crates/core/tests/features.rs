use std::f64::consts::PI;

use eegpipe_core::features::{
    band_power, extract_features, feature_names, histogram_pmf, mean, shannon_entropy, std_dev,
    variance, EntropyConfig, FeatureConfig, FeatureKind, FeatureMatrix, LogBase, Pmf,
};
use eegpipe_core::signal::{channel_names, Recording, TaskLabel, TrialSet};
use eegpipe_core::wavelet::{band_map, db4_pair, dwt_multilevel, reconstruct_subbands, BandName};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Neumaier-compensated sum.
fn compensated_sum(x: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in x {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[test]
fn statistics_match_compensated_oracle() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offset = rng.random_range(-1e3..1e3);
        let x: Vec<f64> = (0..2500)
            .map(|_| offset + rng.random_range(-50.0..50.0))
            .collect();
        let n = x.len() as f64;
        let m = compensated_sum(x.iter().copied()) / n;
        let v = compensated_sum(x.iter().map(|a| (a - m) * (a - m))) / n;
        assert!(rel(mean(&x).unwrap(), m) < 1e-10);
        assert!(rel(variance(&x).unwrap(), v) < 1e-10);
        assert!(rel(std_dev(&x).unwrap(), v.sqrt()) < 1e-10);
    }
    assert!((variance(&[1.0, 2.0, 3.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn entropy_examples() {
    let uniform = Pmf {
        probabilities: vec![1.0 / 16.0; 16],
        bin_edges: (0..=16).map(f64::from).collect(),
    };
    assert_eq!(shannon_entropy(&uniform, LogBase::Two), 4.0);
    let degenerate = Pmf {
        probabilities: vec![0.0, 1.0, 0.0],
        bin_edges: vec![0.0, 1.0, 2.0, 3.0],
    };
    assert_eq!(shannon_entropy(&degenerate, LogBase::Two), 0.0);
    let p = Pmf {
        probabilities: vec![0.5, 0.25, 0.25],
        bin_edges: vec![0.0, 1.0, 2.0, 3.0],
    };
    assert!((shannon_entropy(&p, LogBase::Two) - 1.5).abs() < 1e-15);
    assert!((shannon_entropy(&p, LogBase::E) - 1.5 * 2f64.ln()).abs() < 1e-15);
    assert!((shannon_entropy(&p, LogBase::Ten) - 1.5 * 2f64.log10()).abs() < 1e-15);
}

#[test]
fn entropy_bounds_over_random_pmfs() {
    let cfg = EntropyConfig::default();
    let max = (cfg.bins as f64).log2();
    for seed in 0..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..400);
        let spread = rng.random_range(0.0..5.0);
        let x: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-1.0..1.0f64).powi(3) * spread)
            .collect();
        let p = histogram_pmf(&x, &cfg).unwrap();
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.bin_edges.windows(2).all(|w| w[0] < w[1]));
        let h = shannon_entropy(&p, LogBase::Two);
        assert!((0.0..=max + 1e-12).contains(&h), "seed {seed}: {h}");
    }
}

#[test]
fn sine_band_power() {
    let x: Vec<f64> = (0..1000)
        .map(|i| (2.0 * PI * 5.0 * i as f64 / 250.0).sin())
        .collect();
    assert!((band_power(&x).unwrap() - 0.5).abs() < 1e-6);
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
    assert!((band_power(&y).unwrap() - 9.0 * band_power(&x).unwrap()).abs() < 1e-12);
    assert_eq!(band_power(&[0.0; 8]).unwrap(), 0.0);
}

#[test]
fn subband_powers_add_up() {
    let p = db4_pair();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..2048).map(|_| rng.random_range(-20.0..20.0)).collect();
        let d = dwt_multilevel(&x, 250.0, 5, &p).unwrap();
        let sum: f64 = d
            .subbands()
            .into_iter()
            .map(|sb| band_power(&reconstruct_subbands(&d, &[sb], &p).unwrap()).unwrap())
            .sum();
        assert!(rel(sum, band_power(&x).unwrap()) < 1e-6);
    }
}

fn seven_channels() -> Vec<&'static str> {
    vec!["c3", "c4", "p3", "p4", "o1", "o2", "EOG"]
}

fn trialset(trials: Vec<Vec<Vec<f64>>>) -> TrialSet {
    let ch = channel_names(&seven_channels()).unwrap();
    let table = vec![TaskLabel::new(0, "baseline"), TaskLabel::new(1, "letter")];
    let n = trials.len();
    let recs = trials
        .into_iter()
        .map(|d| Recording::new(250.0, ch.clone(), d).unwrap())
        .collect();
    let labels = (0..n).map(|i| table[i % 2].clone()).collect();
    TrialSet::new("t", 250.0, ch, table, recs, labels).unwrap()
}

fn noise_trial(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..7)
        .map(|_| (0..2500).map(|_| rng.random_range(-30.0..30.0)).collect())
        .collect()
}

#[test]
fn golden_column_names() {
    let golden: Vec<String> = include_str!("fixtures/feature_names.txt")
        .lines()
        .map(str::to_owned)
        .collect();
    let fm = extract_features(
        &trialset(vec![noise_trial(1)]),
        &FeatureConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(fm.feature_names(), golden.as_slice());
    assert_eq!(
        feature_names(&seven_channels()[..6], &FeatureConfig::default()),
        golden
    );
}

#[test]
fn selection_order_does_not_matter() {
    let cfg = FeatureConfig {
        bands: vec![BandName::Gamma, BandName::Theta],
        per_band_features: vec![FeatureKind::Entropy, FeatureKind::Mean],
        include_broadband_spectrum_peak: true,
        include_eog: true,
        ..FeatureConfig::default()
    };
    let names = feature_names(&["c3", "EOG"], &cfg);
    assert_eq!(
        names,
        vec![
            "c3.theta.mean",
            "c3.theta.entropy",
            "c3.gamma.mean",
            "c3.gamma.entropy",
            "c3.broadband.spectrum_peak",
            "EOG.theta.mean",
            "EOG.theta.entropy",
            "EOG.gamma.mean",
            "EOG.gamma.entropy",
            "EOG.broadband.spectrum_peak",
        ]
    );
}

#[test]
fn identical_trials_give_identical_rows() {
    let fm = extract_features(
        &trialset(vec![noise_trial(3), noise_trial(3)]),
        &FeatureConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(fm.values()[0], fm.values()[1]);
    assert_eq!(fm.labels(), &[0, 1]);
}

#[test]
fn features_match_a_manual_computation() {
    let ts = trialset(vec![noise_trial(5)]);
    let fm = extract_features(&ts, &FeatureConfig::default(), None).unwrap();
    let p = db4_pair();
    let map = band_map(250.0, 5).unwrap();
    let x = &ts.trials()[0].data()[2];
    let d = eegpipe_core::wavelet::decompose(x, 250.0, 5, &p).unwrap();
    let alpha =
        eegpipe_core::wavelet::reconstruct_band(&d, map.get(BandName::Alpha).unwrap(), &p).unwrap();
    let col = |name: &str| fm.feature_names().iter().position(|n| n == name).unwrap();
    let row = &fm.values()[0];
    assert_eq!(row[col("p3.alpha.variance")], variance(&alpha).unwrap());
    assert_eq!(row[col("p3.alpha.band_power")], band_power(&alpha).unwrap());
    let h = shannon_entropy(
        &histogram_pmf(&alpha, &EntropyConfig::default()).unwrap(),
        LogBase::Two,
    );
    assert_eq!(row[col("p3.alpha.entropy")], h);
}

#[test]
fn spectrum_peak_column() {
    let mut trial = vec![vec![0.0; 2500]; 7];
    trial[0] = (0..2500)
        .map(|i| (2.0 * PI * 10.0 * i as f64 / 250.0).sin())
        .collect();
    let cfg = FeatureConfig {
        include_broadband_spectrum_peak: true,
        ..FeatureConfig::default()
    };
    let fm = extract_features(&trialset(vec![trial]), &cfg, None).unwrap();
    assert_eq!(fm.n_features(), 156);
    let i = fm
        .feature_names()
        .iter()
        .position(|n| n == "c3.broadband.spectrum_peak")
        .unwrap();
    assert!((fm.values()[0][i] - 10.0).abs() < 0.1);
}

#[test]
fn trial_errors_carry_the_trial_index() {
    let mut bad = noise_trial(0);
    bad[1][7] = f64::NAN;
    let ts = trialset(vec![noise_trial(1), bad]);
    let err = extract_features(&ts, &FeatureConfig::default(), None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("trial 1"), "{err}");
    assert!(err.contains("c4"), "{err}");
}

#[test]
fn feature_csv_round_trip() {
    let fm = extract_features(
        &trialset(vec![noise_trial(8), noise_trial(9)]),
        &FeatureConfig::default(),
        None,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    fm.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().next().unwrap().ends_with(",label"));
    let back = FeatureMatrix::read_csv(&path, Some(2)).unwrap();
    assert_eq!(back, fm);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_is_permutation_invariant(weights in prop::collection::vec(0.0..1.0f64, 2..40), seed in any::<u64>()) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let edges: Vec<f64> = (0..=probs.len()).map(|i| i as f64).collect();
        let mut shuffled = probs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = shannon_entropy(&Pmf { probabilities: probs, bin_edges: edges.clone() }, LogBase::Two);
        let b = shannon_entropy(&Pmf { probabilities: shuffled, bin_edges: edges }, LogBase::Two);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a <= (weights.len() as f64).log2() + 1e-12);
    }

    #[test]
    fn uniform_occupancy_reaches_the_maximum(bins in 2usize..64) {
        let x: Vec<f64> = (0..bins).map(|i| i as f64).collect();
        let cfg = EntropyConfig { bins, log_base: LogBase::Two };
        let h = shannon_entropy(&histogram_pmf(&x, &cfg).unwrap(), LogBase::Two);
        prop_assert!((h - (bins as f64).log2()).abs() < 1e-12);
    }
}
