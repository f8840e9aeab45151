//! Per-band statistics, entropy and power, assembled into a labeled matrix.
//!
//! Column order is fixed: channels in recording order, then bands from delta
//! to gamma, then features as listed in [`FeatureKind::ALL`]. Names follow
//! `<channel>.<band>.<feature>`.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{preprocess_trial, PreprocessSpec};
use crate::signal::{format_sample, Recording, TrialSet};
use crate::spectral::power_spectrum;
use crate::wavelet::{
    band_map, db4_pair, decompose, reconstruct_band, BandMap, BandName, WaveletFilterPair,
};

pub fn mean(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

/// Population variance, divisor `n`.
pub fn variance(x: &[f64]) -> Result<f64> {
    let mu = mean(x)?;
    Ok(x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / x.len() as f64)
}

pub fn std_dev(x: &[f64]) -> Result<f64> {
    variance(x).map(f64::sqrt)
}

/// Pearson correlation; `None` for mismatched, empty or constant series.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let ma = mean(a).ok()?;
    let mb = mean(b).ok()?;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    pub fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Two => v.log2(),
            LogBase::E => v.ln(),
            LogBase::Ten => v.log10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyConfig {
    pub bins: usize,
    pub log_base: LogBase,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            bins: 16,
            log_base: LogBase::Two,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub probabilities: Vec<f64>,
    pub bin_edges: Vec<f64>,
}

/// Equal-width amplitude histogram over `[min, max]`, last bin closed.
/// A constant signal gets edges widened by ±0.5 around its value.
pub fn histogram_pmf(x: &[f64], cfg: &EntropyConfig) -> Result<Pmf> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bins, got {}",
            cfg.bins
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("histogram input".into()));
    }
    let bins = cfg.bins;
    let (mut lo, mut hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in x {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = x.len() as f64;
    Ok(Pmf {
        probabilities: counts.iter().map(|&c| c as f64 / n).collect(),
        bin_edges: (0..=bins)
            .map(|i| if i == bins { hi } else { lo + i as f64 * width })
            .collect(),
    })
}

/// `−Σ p·log_b p`, with `0·log 0 = 0`.
pub fn shannon_entropy(p: &Pmf, base: LogBase) -> f64 {
    let h: f64 = p
        .probabilities
        .iter()
        .filter(|&&pi| pi > 0.0)
        .map(|&pi| pi * base.log(pi))
        .sum();
    if h == 0.0 {
        0.0
    } else {
        -h
    }
}

/// Mean squared amplitude.
pub fn band_power(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Mean,
    Variance,
    Std,
    Entropy,
    BandPower,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Mean,
        FeatureKind::Variance,
        FeatureKind::Std,
        FeatureKind::Entropy,
        FeatureKind::BandPower,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mean => "mean",
            FeatureKind::Variance => "variance",
            FeatureKind::Std => "std",
            FeatureKind::Entropy => "entropy",
            FeatureKind::BandPower => "band_power",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub bands: Vec<BandName>,
    pub per_band_features: Vec<FeatureKind>,
    pub entropy: EntropyConfig,
    pub include_broadband_spectrum_peak: bool,
    /// Treat the EOG reference as a feature channel too.
    pub include_eog: bool,
    pub levels: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            bands: BandName::ALL.to_vec(),
            per_band_features: FeatureKind::ALL.to_vec(),
            entropy: EntropyConfig::default(),
            include_broadband_spectrum_peak: false,
            include_eog: false,
            levels: 5,
        }
    }
}

impl FeatureConfig {
    pub fn check(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::InvalidParameter("select at least one band".into()));
        }
        if self.per_band_features.is_empty() {
            return Err(Error::InvalidParameter(
                "select at least one feature".into(),
            ));
        }
        if self.entropy.bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "entropy needs at least 2 bins, got {}",
                self.entropy.bins
            )));
        }
        Ok(())
    }

    fn ordered_bands(&self) -> Vec<BandName> {
        BandName::ALL
            .into_iter()
            .filter(|b| self.bands.contains(b))
            .collect()
    }

    fn ordered_features(&self) -> Vec<FeatureKind> {
        FeatureKind::ALL
            .into_iter()
            .filter(|k| self.per_band_features.contains(k))
            .collect()
    }

    fn feature_channels<'a>(&self, r: &'a Recording) -> Vec<(usize, &'a str)> {
        r.channels()
            .iter()
            .enumerate()
            .filter(|(_, c)| self.include_eog || !c.is_eog())
            .map(|(i, c)| (i, c.as_str()))
            .collect()
    }
}

pub const SPECTRUM_PEAK: &str = "broadband.spectrum_peak";

pub fn feature_names<S: AsRef<str>>(channels: &[S], cfg: &FeatureConfig) -> Vec<String> {
    let bands = cfg.ordered_bands();
    let kinds = cfg.ordered_features();
    let mut names = Vec::new();
    for ch in channels {
        let ch = ch.as_ref();
        for b in &bands {
            for k in &kinds {
                names.push(format!("{ch}.{b}.{k}"));
            }
        }
        if cfg.include_broadband_spectrum_peak {
            names.push(format!("{ch}.{SPECTRUM_PEAK}"));
        }
    }
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    values: Vec<Vec<f64>>,
    feature_names: Vec<String>,
    labels: Vec<usize>,
    class_count: usize,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<Vec<f64>>,
        feature_names: Vec<String>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: labels.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "duplicate feature name '{dup}'"
            )));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: feature_names.len(),
                    actual: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "row {i}, feature '{}'",
                    feature_names[j]
                )));
            }
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: class_count,
            });
        }
        Ok(FeatureMatrix {
            values,
            feature_names,
            labels,
            class_count,
        })
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: indices.iter().map(|&i| self.values[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// Columns whose name satisfies `keep`.
    pub fn select_columns(&self, keep: impl Fn(&str) -> bool) -> FeatureMatrix {
        let cols: Vec<usize> = (0..self.n_features())
            .filter(|&j| keep(&self.feature_names[j]))
            .collect();
        FeatureMatrix {
            values: self
                .values
                .iter()
                .map(|r| cols.iter().map(|&j| r[j]).collect())
                .collect(),
            feature_names: cols
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            labels: self.labels.clone(),
            class_count: self.class_count,
        }
    }

    /// Header of feature names plus a trailing `label` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let fmt_err = |e: csv::Error| Error::format(path, e.to_string());
        w.write_record(
            self.feature_names
                .iter()
                .map(String::as_str)
                .chain(["label"]),
        )
        .map_err(fmt_err)?;
        for (row, label) in self.values.iter().zip(&self.labels) {
            w.write_record(
                row.iter()
                    .map(|v| format_sample(*v))
                    .chain(std::iter::once(label.to_string())),
            )
            .map_err(fmt_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads [`write_csv`](Self::write_csv) output. The class count is
    /// `class_count` if given, else one past the largest label.
    pub fn read_csv(path: &Path, class_count: Option<usize>) -> Result<FeatureMatrix> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(BufReader::new(file));
        let headers = r
            .headers()
            .map_err(|e| Error::format(path, e.to_string()))?
            .clone();
        if headers.iter().next_back() != Some("label") {
            return Err(Error::format(path, "last column must be 'label'"));
        }
        let names: Vec<String> = headers
            .iter()
            .take(headers.len() - 1)
            .map(String::from)
            .collect();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            let bad = |what: &str| Error::format(path, format!("row {i}: {what}"));
            let mut cells = rec.iter().collect::<Vec<_>>();
            let label = cells
                .pop()
                .ok_or_else(|| bad("empty row"))?
                .parse::<usize>()
                .map_err(|_| bad("label is not a non-negative integer"))?;
            let row = cells
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| bad(&format!("'{c}' is not a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
            labels.push(label);
        }
        let k = class_count.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        FeatureMatrix::new(values, names, labels, k)
    }
}

/// Features of one recording, in [`feature_names`] order.
pub fn trial_features(
    r: &Recording,
    cfg: &FeatureConfig,
    pair: &WaveletFilterPair,
    map: &BandMap,
) -> Result<Vec<f64>> {
    let bands = cfg.ordered_bands();
    let kinds = cfg.ordered_features();
    let mut out = Vec::new();
    for (c, name) in cfg.feature_channels(r) {
        let x = &r.data()[c];
        let per_channel = || -> Result<Vec<f64>> {
            let d = decompose(x, r.sample_rate_hz(), cfg.levels, pair)?;
            let mut v = Vec::with_capacity(bands.len() * kinds.len() + 1);
            for b in &bands {
                let band = map
                    .get(*b)
                    .ok_or_else(|| Error::BandNotMapped(b.to_string()))?;
                let y = reconstruct_band(&d, band, pair)?;
                for k in &kinds {
                    v.push(match k {
                        FeatureKind::Mean => mean(&y)?,
                        FeatureKind::Variance => variance(&y)?,
                        FeatureKind::Std => std_dev(&y)?,
                        FeatureKind::Entropy => {
                            shannon_entropy(&histogram_pmf(&y, &cfg.entropy)?, cfg.entropy.log_base)
                        }
                        FeatureKind::BandPower => band_power(&y)?,
                    });
                }
            }
            if cfg.include_broadband_spectrum_peak {
                v.push(power_spectrum(x, r.sample_rate_hz())?.peak_frequency_hz());
            }
            Ok(v)
        };
        out.extend(per_channel().map_err(|e| e.in_channel(name))?);
    }
    Ok(out)
}

fn with_trial(e: Error, trial: usize) -> Error {
    Error::Trial {
        trial,
        message: e.to_string(),
    }
}

/// Optionally preprocess each trial, then compute its feature row.
pub fn extract_features(
    ts: &TrialSet,
    cfg: &FeatureConfig,
    preproc: Option<&PreprocessSpec>,
) -> Result<FeatureMatrix> {
    cfg.check()?;
    let pair = db4_pair();
    let map = band_map(ts.sample_rate_hz(), cfg.levels)?;
    let channels: Vec<&str> = ts
        .channels()
        .iter()
        .filter(|c| cfg.include_eog || !c.is_eog())
        .map(|c| c.as_str())
        .collect();
    let names = feature_names(&channels, cfg);

    let mut rows = Vec::with_capacity(ts.len());
    for (t, r) in ts.trials().iter().enumerate() {
        let cleaned;
        let input = match preproc.filter(|p| !p.is_noop()) {
            Some(spec) => {
                cleaned = preprocess_trial(r, spec)
                    .map_err(|e| with_trial(e, t))?
                    .clean;
                &cleaned
            }
            None => r,
        };
        rows.push(trial_features(input, cfg, &pair, &map).map_err(|e| with_trial(e, t))?);
    }
    FeatureMatrix::new(rows, names, ts.label_ids(), ts.class_count())
}
