//! Synthetic stand-in for the five-task EEG dataset: 7 channels × 2500
//! samples at 250 Hz per trial, classes told apart by which rhythm dominates.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use eegpipe_core::signal::{
    channel_names, write_packed, write_trialset, Recording, TaskLabel, TrialSet, TrialSetFormat,
};
use eegpipe_core::spectral::{ifft, ComplexSpectrum};
use eegpipe_core::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const SAMPLE_RATE_HZ: f64 = 250.0;
pub const SAMPLES: usize = 2500;
pub const CHANNELS: [&str; 7] = ["c3", "c4", "p3", "p4", "o1", "o2", "EOG"];
pub const TASK_NAMES: [&str; 5] = [
    "Baseline",
    "Multiplication",
    "Letter-composing",
    "Rotation",
    "Counting",
];

/// Carrier range per rhythm (delta..gamma), chosen inside the matching
/// dyadic sub-band at 250 Hz and below the default 40 Hz low-pass.
const CARRIER_HZ: [(f64, f64); 5] = [
    (1.0, 3.0),
    (4.5, 7.0),
    (9.0, 12.5),
    (17.0, 27.0),
    (32.0, 36.0),
];
/// Resting amplitude per rhythm in µV, falling with frequency.
const BASE_AMPLITUDE: [f64; 5] = [20.0, 12.0, 10.0, 5.0, 3.0];
/// How strongly blinks reach each scalp channel; frontal-most first.
const BLINK_REACH: [f64; 6] = [1.0, 1.0, 0.6, 0.6, 0.3, 0.3];
const NOISE_UV: f64 = 4.0;
const BURST_RATE_HZ: f64 = 0.5;
const BURST_SPREAD: f64 = 1.0;
const OSCILLATORS_PER_BAND: usize = 1;
/// Eye-channel activity of its own, so the EOG row is never a pure mix of the scalp rows.
const EOG_NOISE_UV: f64 = 5.0;

pub fn task_labels(classes: usize) -> Vec<TaskLabel> {
    (0..classes)
        .map(|i| match TASK_NAMES.get(i) {
            Some(name) => TaskLabel::new(i, *name),
            None => TaskLabel::new(i, format!("Task {}", i + 1)),
        })
        .collect()
}

/// Per-rhythm gain for `class`: one band is boosted strongly, a second one
/// mildly, and the pair differs for every class.
pub fn class_gains(class: usize) -> [f64; 5] {
    let mut g = [1.0; 5];
    let main = class % 5;
    g[main] = 3.0;
    let second = (main + 1 + class / 5) % 5;
    if second != main {
        g[second] = 1.8;
    }
    g
}

/// Unit-variance noise with a 1/f power spectrum, shaped in the frequency
/// domain and brought back with the inverse FFT.
pub fn pink_noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = n.next_power_of_two().max(2);
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for k in 1..=m / 2 {
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = 1.0 / (k as f64).sqrt();
        spec[k] = Complex64::from_polar(amp, phase);
        if k < m / 2 {
            spec[m - k] = spec[k].conj();
        } else {
            spec[k] = Complex64::new(amp, 0.0);
        }
    }
    let x: Vec<f64> = ifft(&ComplexSpectrum { values: spec, n: m })
        .expect("power-of-two length")
        .into_iter()
        .take(n)
        .map(|z| z.re)
        .collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    x.into_iter().map(|v| (v - mean) / sd).collect()
}

/// Log-normal amplitude envelope with unit mean that wanders below ~0.5 Hz,
/// so rhythms come in bursts rather than as steady tones.
pub fn burst_envelope(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = n.next_power_of_two().max(2);
    let top = ((BURST_RATE_HZ * m as f64 / SAMPLE_RATE_HZ).ceil() as usize).clamp(1, m / 2 - 1);
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for k in 1..=top {
        spec[k] = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
        spec[m - k] = spec[k].conj();
    }
    let z: Vec<f64> = ifft(&ComplexSpectrum { values: spec, n: m })
        .expect("power-of-two length")
        .into_iter()
        .take(n)
        .map(|c| c.re)
        .collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    z.into_iter()
        .map(|v| (BURST_SPREAD * (v - mean) / sd - 0.5 * BURST_SPREAD * BURST_SPREAD).exp())
        .collect()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn scalp_channel(gains: &[f64; 5], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = pink_noise(SAMPLES, rng);
    x.iter_mut().for_each(|v| *v *= NOISE_UV);
    for band in 0..5 {
        let (lo, hi) = CARRIER_HZ[band];
        for _ in 0..OSCILLATORS_PER_BAND {
            let f = rng.random_range(lo..hi);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = BASE_AMPLITUDE[band] * gains[band] * rng.random_range(0.7..1.0)
                / (OSCILLATORS_PER_BAND as f64).sqrt();
            let env = burst_envelope(SAMPLES, rng);
            for (i, v) in x.iter_mut().enumerate() {
                *v += amp * env[i] * (2.0 * PI * f * i as f64 / SAMPLE_RATE_HZ + phase).sin();
            }
        }
    }
    x
}

/// Smooth positive deflections of a few hundred milliseconds at random times.
pub fn blink_train(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b = vec![0.0; SAMPLES];
    for _ in 0..count {
        let centre = rng.random_range(100.0..(SAMPLES as f64 - 100.0));
        let width = rng.random_range(10.0..18.0);
        let amp = rng.random_range(80.0..150.0);
        for (i, v) in b.iter_mut().enumerate() {
            let d = (i as f64 - centre) / width;
            if d.abs() < 8.0 {
                *v += amp * (-0.5 * d * d).exp();
            }
        }
    }
    b
}

struct TrialParts {
    clean_scalp: Vec<Vec<f64>>,
    blink: Vec<f64>,
    gains: [f64; 6],
    eog: Vec<f64>,
}

fn trial_parts(
    class: usize,
    blinks: usize,
    blink_gain: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> TrialParts {
    let gains = class_gains(class);
    let clean_scalp: Vec<Vec<f64>> = (0..6).map(|_| scalp_channel(&gains, rng)).collect();
    let blink = blink_train(blinks, rng);
    let mut bleed = [0.0; 6];
    for (g, reach) in bleed.iter_mut().zip(BLINK_REACH) {
        *g = reach * rng.random_range(blink_gain.0..blink_gain.1);
    }
    // the eye channel also picks up a little scalp activity
    let pickup: Vec<f64> = (0..6).map(|_| 0.02 * gauss(rng)).collect();
    let own = pink_noise(SAMPLES, rng);
    let eog = (0..SAMPLES)
        .map(|t| {
            blink[t]
                + EOG_NOISE_UV * own[t]
                + (0..6).map(|c| pickup[c] * clean_scalp[c][t]).sum::<f64>()
        })
        .collect();
    TrialParts {
        clean_scalp,
        blink,
        gains: bleed,
        eog,
    }
}

fn contaminated(parts: &TrialParts) -> Vec<Vec<f64>> {
    let mut data: Vec<Vec<f64>> = parts
        .clean_scalp
        .iter()
        .zip(parts.gains)
        .map(|(row, g)| {
            row.iter()
                .zip(&parts.blink)
                .map(|(x, b)| x + g * b)
                .collect()
        })
        .collect();
    data.push(parts.eog.clone());
    data
}

/// `classes × trials_per_class` trials; trial `t` belongs to class `t % classes`.
pub fn generate_fixture(classes: usize, trials_per_class: usize, seed: u64) -> Result<TrialSet> {
    if classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = task_labels(classes);
    let ch = channel_names(&CHANNELS)?;
    let n = classes * trials_per_class;
    let mut trials = Vec::with_capacity(n);
    let mut trial_labels = Vec::with_capacity(n);
    for t in 0..n {
        let class = t % classes;
        let blinks = rng.random_range(0..=3);
        let parts = trial_parts(class, blinks, (0.05, 0.3), &mut rng);
        trials.push(
            Recording::new(SAMPLE_RATE_HZ, ch.clone(), contaminated(&parts))?
                .with_label(labels[class].clone()),
        );
        trial_labels.push(labels[class].clone());
    }
    TrialSet::new(
        format!("synthetic-{classes}x{trials_per_class}-seed{seed}"),
        SAMPLE_RATE_HZ,
        ch,
        labels,
        trials,
        trial_labels,
    )
}

/// Write `ts` into `dir`, returning the path to load it back from.
pub fn write_fixture(ts: &TrialSet, dir: &Path, format: TrialSetFormat) -> Result<PathBuf> {
    match format {
        TrialSetFormat::CsvManifest => write_trialset(ts, dir),
        TrialSetFormat::PackedBinary => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            let path = dir.join("trials.eegpack");
            write_packed(ts, &path)?;
            Ok(path)
        }
    }
}

pub struct BlinkFixture {
    pub contaminated: Recording,
    /// Same trial without the blink bleed on the scalp channels.
    pub clean: Recording,
    pub blink: Vec<f64>,
}

/// One heavily blink-contaminated trial with its uncontaminated original.
pub fn blink_contaminated_recording(seed: u64) -> Result<BlinkFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = trial_parts(2, 6, (0.4, 0.8), &mut rng);
    let ch = channel_names(&CHANNELS)?;
    let mut clean_rows = parts.clean_scalp.clone();
    clean_rows.push(parts.eog.clone());
    Ok(BlinkFixture {
        contaminated: Recording::new(SAMPLE_RATE_HZ, ch.clone(), contaminated(&parts))?,
        clean: Recording::new(SAMPLE_RATE_HZ, ch, clean_rows)?,
        blink: parts.blink,
    })
}

/// Gaussian clusters with unit spread whose centres are at least `gap` apart.
pub fn separable_blobs(
    classes: usize,
    dim: usize,
    per_class: usize,
    gap: f64,
    seed: u64,
) -> Result<eegpipe_core::features::FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres: Vec<Vec<f64>> = Vec::new();
    let mut attempts = 0;
    while centres.len() < classes {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::InvalidParameter(
                "could not place blob centres".into(),
            ));
        }
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-gap..gap)).collect();
        let far = centres.iter().all(|o| {
            o.iter()
                .zip(&c)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= gap
        });
        if far {
            centres.push(c);
        }
    }
    let mut rows = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for i in 0..classes * per_class {
        let c = i % classes;
        rows.push(
            centres[c]
                .iter()
                .map(|m| m + gauss(&mut rng))
                .collect::<Vec<f64>>(),
        );
        labels.push(c);
    }
    let names = (0..dim).map(|i| format!("x{i}")).collect();
    eegpipe_core::features::FeatureMatrix::new(rows, names, labels, classes)
}
