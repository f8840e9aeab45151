//! Multichannel recordings, labeled trial collections and their on-disk forms.
//!
//! A trial set lives on disk either as a JSON manifest plus one headerless
//! CSV per trial (one row per channel), or as a single packed binary file.
//! Samples are kept as `f64` in whatever unit the source used (assumed µV).

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the reserved ocular reference channel.
pub const EOG: &str = "EOG";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelName(String);

impl ChannelName {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::InvalidRecording("empty channel name".into()));
        }
        Ok(ChannelName(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_eog(&self) -> bool {
        self.0.eq_ignore_ascii_case(EOG)
    }

    /// Exact match, except that the EOG reference matches case-insensitively.
    pub fn matches(&self, name: &str) -> bool {
        if self.is_eog() {
            name.eq_ignore_ascii_case(EOG)
        } else {
            self.0 == name
        }
    }

    fn key(&self) -> String {
        if self.is_eog() {
            EOG.to_string()
        } else {
            self.0.clone()
        }
    }
}

impl TryFrom<String> for ChannelName {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        ChannelName::new(value)
    }
}

impl From<ChannelName> for String {
    fn from(value: ChannelName) -> Self {
        value.0
    }
}

impl fmt::Display for ChannelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parse a list of names into channels, rejecting empties and duplicates.
pub fn channel_names<S: AsRef<str>>(names: &[S]) -> Result<Vec<ChannelName>> {
    let channels = names
        .iter()
        .map(|n| ChannelName::new(n.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    check_unique(&channels)?;
    Ok(channels)
}

fn check_unique(channels: &[ChannelName]) -> Result<()> {
    let mut seen = HashSet::new();
    for c in channels {
        if !seen.insert(c.key()) {
            return Err(Error::InvalidRecording(format!("duplicate channel '{c}'")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLabel {
    pub id: usize,
    pub name: String,
}

impl TaskLabel {
    pub fn new(id: usize, name: impl Into<String>) -> Self {
        TaskLabel {
            id,
            name: name.into(),
        }
    }
}

/// A channels × samples block of amplitudes at a fixed sample rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recording {
    sample_rate_hz: f64,
    channels: Vec<ChannelName>,
    data: Vec<Vec<f64>>,
    trial_label: Option<TaskLabel>,
}

impl Recording {
    pub fn new(
        sample_rate_hz: f64,
        channels: Vec<ChannelName>,
        data: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidRecording(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvalidRecording("no channels".into()));
        }
        check_unique(&channels)?;
        if data.len() != channels.len() {
            return Err(Error::InvalidRecording(format!(
                "{} channel names but {} data rows",
                channels.len(),
                data.len()
            )));
        }
        let n = data[0].len();
        if n == 0 {
            return Err(Error::InvalidRecording("channels have no samples".into()));
        }
        if let Some((i, row)) = data.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidRecording(format!(
                "ragged rows: channel 0 has {n} samples, channel {i} has {}",
                row.len()
            )));
        }
        Ok(Recording {
            sample_rate_hz,
            channels,
            data,
            trial_label: None,
        })
    }

    pub fn with_label(mut self, label: TaskLabel) -> Self {
        self.trial_label = Some(label);
        self
    }

    /// Same channel layout, rate and label with new sample data.
    pub fn with_data(&self, data: Vec<Vec<f64>>) -> Result<Self> {
        let mut r = Recording::new(self.sample_rate_hz, self.channels.clone(), data)?;
        r.trial_label = self.trial_label.clone();
        Ok(r)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[ChannelName] {
        &self.channels
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Vec<f64>> {
        self.data
    }

    pub fn trial_label(&self) -> Option<&TaskLabel> {
        self.trial_label.as_ref()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data[0].len()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.matches(name))
    }

    pub fn eog_index(&self) -> Option<usize> {
        self.channels.iter().position(ChannelName::is_eog)
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        let i = self
            .channel_index(name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))?;
        Ok(&self.data[i])
    }
}

/// Copy the half-open window `[from, to)` of one channel.
pub fn slice_channel(r: &Recording, channel: &str, from: usize, to: usize) -> Result<Vec<f64>> {
    let samples = r.channel(channel)?;
    if from > to || to > samples.len() {
        return Err(Error::WindowOutOfRange {
            from,
            to,
            len: samples.len(),
        });
    }
    Ok(samples[from..to].to_vec())
}

/// Labeled trials sharing one channel layout and sample rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSet {
    name: String,
    sample_rate_hz: f64,
    channels: Vec<ChannelName>,
    label_table: Vec<TaskLabel>,
    trials: Vec<Recording>,
    labels: Vec<TaskLabel>,
}

impl TrialSet {
    /// Builds a trial set and rejects it if [`validate`] reports any error.
    pub fn new(
        name: impl Into<String>,
        sample_rate_hz: f64,
        channels: Vec<ChannelName>,
        label_table: Vec<TaskLabel>,
        trials: Vec<Recording>,
        labels: Vec<TaskLabel>,
    ) -> Result<Self> {
        let ts =
            TrialSet::new_unchecked(name, sample_rate_hz, channels, label_table, trials, labels);
        let report = validate(&ts);
        if !report.ok {
            let msgs: Vec<_> = report.errors().map(|i| i.message.as_str()).collect();
            return Err(Error::InvalidRecording(msgs.join("; ")));
        }
        Ok(ts)
    }

    /// Skips validation; call [`validate`] before trusting the result.
    pub fn new_unchecked(
        name: impl Into<String>,
        sample_rate_hz: f64,
        channels: Vec<ChannelName>,
        label_table: Vec<TaskLabel>,
        trials: Vec<Recording>,
        labels: Vec<TaskLabel>,
    ) -> Self {
        let trials = trials
            .into_iter()
            .zip(labels.iter().map(Some).chain(std::iter::repeat(None)))
            .map(|(r, l)| match l {
                Some(l) => r.with_label(l.clone()),
                None => r,
            })
            .collect();
        TrialSet {
            name: name.into(),
            sample_rate_hz,
            channels,
            label_table,
            trials,
            labels,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[ChannelName] {
        &self.channels
    }

    pub fn label_table(&self) -> &[TaskLabel] {
        &self.label_table
    }

    pub fn trials(&self) -> &[Recording] {
        &self.trials
    }

    pub fn labels(&self) -> &[TaskLabel] {
        &self.labels
    }

    pub fn label_ids(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.id).collect()
    }

    pub fn class_count(&self) -> usize {
        self.label_table.iter().map(|l| l.id + 1).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Replace every trial by `f(index, trial)`, keeping labels and layout.
    pub fn map_trials<F>(&self, mut f: F) -> Result<TrialSet>
    where
        F: FnMut(usize, &Recording) -> Result<Recording>,
    {
        let trials = self
            .trials
            .iter()
            .enumerate()
            .map(|(i, r)| f(i, r))
            .collect::<Result<Vec<_>>>()?;
        TrialSet::new(
            self.name.clone(),
            self.sample_rate_hz,
            self.channels.clone(),
            self.label_table.clone(),
            trials,
            self.labels.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }
}

pub fn validate(ts: &TrialSet) -> ValidationReport {
    let mut issues = Vec::new();
    let mut error = |m: String| {
        issues.push(Issue {
            severity: Severity::Error,
            message: m,
        })
    };

    if !(ts.sample_rate_hz > 0.0 && ts.sample_rate_hz.is_finite()) {
        error(format!(
            "sample rate must be positive, got {}",
            ts.sample_rate_hz
        ));
    }
    if ts.channels.is_empty() {
        error("no channels declared".into());
    }
    if let Err(e) = check_unique(&ts.channels) {
        error(e.to_string());
    }

    if ts.label_table.len() < 2 {
        error(format!(
            "label table needs at least 2 tasks, has {}",
            ts.label_table.len()
        ));
    }
    let k = ts.label_table.len();
    let mut ids = HashSet::new();
    for l in &ts.label_table {
        if !ids.insert(l.id) {
            error(format!("duplicate label id {}", l.id));
        }
        if l.id >= k {
            error(format!("label id {} out of range 0..{k}", l.id));
        }
    }

    if ts.labels.len() != ts.trials.len() {
        error(format!(
            "{} trials but {} labels",
            ts.trials.len(),
            ts.labels.len()
        ));
    }
    for (t, label) in ts.labels.iter().enumerate() {
        if !ts.label_table.iter().any(|l| l.id == label.id) {
            error(format!("trial {t}: label {} not in label table", label.id));
        }
    }

    for (t, r) in ts.trials.iter().enumerate() {
        if r.sample_rate_hz != ts.sample_rate_hz {
            error(format!(
                "trial {t}: sample rate {} Hz differs from {} Hz",
                r.sample_rate_hz, ts.sample_rate_hz
            ));
        }
        if r.channels != ts.channels {
            error(format!("trial {t}: channel layout differs from the set"));
        }
    }

    let mut warnings = Vec::new();
    for (t, r) in ts.trials.iter().enumerate() {
        for (c, row) in r.data.iter().enumerate() {
            let mut bad = row.iter().enumerate().filter(|(_, v)| !v.is_finite());
            if let Some((idx, _)) = bad.next() {
                let count = 1 + bad.count();
                warnings.push(format!(
                    "trial {t}, channel {} ({c}), sample {idx}: non-finite value ({count} in channel)",
                    r.channels[c]
                ));
            }
        }
    }
    if !ts.channels.is_empty() && !ts.channels.iter().any(ChannelName::is_eog) {
        warnings.push("no EOG channel: automatic artifact scoring disabled".into());
    }
    issues.extend(warnings.into_iter().map(|m| Issue {
        severity: Severity::Warning,
        message: m,
    }));

    let ok = !issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues }
}

// ---------------------------------------------------------------------------
// File formats

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialSetFormat {
    CsvManifest,
    PackedBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub sample_rate_hz: f64,
    pub channels: Vec<String>,
    pub labels: Vec<TaskLabel>,
    pub trials: Vec<ManifestTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub file: String,
    pub label_id: usize,
    /// Overrides nothing; when present it must agree with the manifest rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
}

/// Format an `f64` so that parsing the text gives back the same value.
pub fn format_sample(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Error::format(path, format!("row {i}, column {j}: not a number: '{cell}'"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_matrix_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_writer(BufWriter::new(file));
    for row in rows {
        w.write_record(row.iter().map(|v| format_sample(*v)))
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_trialset(path: &Path, format: TrialSetFormat) -> Result<TrialSet> {
    match format {
        TrialSetFormat::CsvManifest => load_manifest(path),
        TrialSetFormat::PackedBinary => load_packed(path),
    }
}

fn label_lookup(table: &[TaskLabel], trial: usize, id: usize) -> Result<TaskLabel> {
    table
        .iter()
        .find(|l| l.id == id)
        .cloned()
        .ok_or_else(|| Error::Trial {
            trial,
            message: format!(
                "label {id} out of range (label table has {} entries)",
                table.len()
            ),
        })
}

fn load_manifest(path: &Path) -> Result<TrialSet> {
    let manifest: Manifest = read_json(path)?;
    let channels = channel_names(&manifest.channels)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut trials = Vec::with_capacity(manifest.trials.len());
    let mut labels = Vec::with_capacity(manifest.trials.len());
    for (t, entry) in manifest.trials.iter().enumerate() {
        let trial_err = |message: String| Error::Trial { trial: t, message };
        if let Some(rate) = entry.sample_rate_hz {
            if rate != manifest.sample_rate_hz {
                return Err(trial_err(format!(
                    "sample rate mismatch: {rate} Hz vs manifest {} Hz",
                    manifest.sample_rate_hz
                )));
            }
        }
        let label = label_lookup(&manifest.labels, t, entry.label_id)?;
        let file = base.join(&entry.file);
        if !file.exists() {
            return Err(trial_err(format!("missing file {}", file.display())));
        }
        let rows = read_matrix_csv(&file).map_err(|e| trial_err(e.to_string()))?;
        if rows.len() != channels.len() {
            return Err(trial_err(format!(
                "{} rows but manifest declares {} channels",
                rows.len(),
                channels.len()
            )));
        }
        if let Some((c, row)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != rows[0].len())
        {
            return Err(trial_err(format!(
                "ragged rows: channel 0 has {} samples, channel {c} has {}",
                rows[0].len(),
                row.len()
            )));
        }
        let rec = Recording::new(manifest.sample_rate_hz, channels.clone(), rows)
            .map_err(|e| trial_err(e.to_string()))?;
        trials.push(rec);
        labels.push(label);
    }
    TrialSet::new(
        manifest.name,
        manifest.sample_rate_hz,
        channels,
        manifest.labels,
        trials,
        labels,
    )
}

/// Write a manifest plus one CSV per trial into `dir`; returns the manifest path.
pub fn write_trialset(ts: &TrialSet, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = ts.len().saturating_sub(1).to_string().len().max(3);
    let mut entries = Vec::with_capacity(ts.len());
    for (t, (r, label)) in ts.trials.iter().zip(&ts.labels).enumerate() {
        let file = format!("trial_{t:0width$}.csv");
        write_matrix_csv(&dir.join(&file), &r.data)?;
        entries.push(ManifestTrial {
            file,
            label_id: label.id,
            sample_rate_hz: None,
        });
    }
    let manifest = Manifest {
        name: ts.name.clone(),
        sample_rate_hz: ts.sample_rate_hz,
        channels: ts.channels.iter().map(|c| c.as_str().to_string()).collect(),
        labels: ts.label_table.clone(),
        trials: entries,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

const PACKED_MAGIC: &[u8; 8] = b"EEGPACK1";

#[derive(Serialize, Deserialize)]
struct PackedHeader {
    name: String,
    sample_rate_hz: f64,
    channels: Vec<String>,
    labels: Vec<TaskLabel>,
    trials: Vec<PackedTrial>,
}

#[derive(Serialize, Deserialize)]
struct PackedTrial {
    label_id: usize,
    samples: usize,
}

/// Single-file layout: magic `EEGPACK1`, little-endian `u64` header length,
/// JSON header, then each trial's samples as little-endian `f64`, channel-major.
pub fn write_packed(ts: &TrialSet, path: &Path) -> Result<()> {
    let header = PackedHeader {
        name: ts.name.clone(),
        sample_rate_hz: ts.sample_rate_hz,
        channels: ts.channels.iter().map(|c| c.as_str().to_string()).collect(),
        labels: ts.label_table.clone(),
        trials: ts
            .trials
            .iter()
            .zip(&ts.labels)
            .map(|(r, l)| PackedTrial {
                label_id: l.id,
                samples: r.n_samples(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| Error::format(path, e.to_string()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(PACKED_MAGIC).map_err(io)?;
    w.write_all(&(header.len() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(&header).map_err(io)?;
    for r in &ts.trials {
        for row in &r.data {
            for v in row {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

fn load_packed(path: &Path) -> Result<TrialSet> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != PACKED_MAGIC {
        return Err(Error::format(path, "not a packed trial set"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| Error::format(path, "truncated header"))?;
    let header: PackedHeader =
        serde_json::from_slice(body).map_err(|e| Error::format(path, e.to_string()))?;
    let channels = channel_names(&header.channels)?;
    let mut cursor = 16 + hlen;
    let mut trials = Vec::new();
    let mut labels = Vec::new();
    for (t, pt) in header.trials.iter().enumerate() {
        let label = label_lookup(&header.labels, t, pt.label_id)?;
        let mut rows = Vec::with_capacity(channels.len());
        for _ in 0..channels.len() {
            let need = pt.samples * 8;
            let chunk = bytes
                .get(cursor..cursor + need)
                .ok_or_else(|| Error::Trial {
                    trial: t,
                    message: "truncated sample data".into(),
                })?;
            rows.push(
                chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            );
            cursor += need;
        }
        let rec = Recording::new(header.sample_rate_hz, channels.clone(), rows).map_err(|e| {
            Error::Trial {
                trial: t,
                message: e.to_string(),
            }
        })?;
        trials.push(rec);
        labels.push(label);
    }
    if cursor != bytes.len() {
        return Err(Error::format(path, "trailing bytes after sample data"));
    }
    TrialSet::new(
        header.name,
        header.sample_rate_hz,
        channels,
        header.labels,
        trials,
        labels,
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordingMeta {
    sample_rate_hz: f64,
    channels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trial_label: Option<TaskLabel>,
}

/// Sidecar metadata path for an exported recording CSV (`x.csv` → `x.meta.json`).
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn export_recording(r: &Recording, path: &Path) -> Result<()> {
    write_matrix_csv(path, &r.data)?;
    let meta = RecordingMeta {
        sample_rate_hz: r.sample_rate_hz,
        channels: r.channels.iter().map(|c| c.as_str().to_string()).collect(),
        trial_label: r.trial_label.clone(),
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn load_recording(path: &Path) -> Result<Recording> {
    let meta: RecordingMeta = read_json(&sidecar_path(path))?;
    let rows = read_matrix_csv(path)?;
    let rec = Recording::new(meta.sample_rate_hz, channel_names(&meta.channels)?, rows)?;
    Ok(match meta.trial_label {
        Some(l) => rec.with_label(l),
        None => rec,
    })
}
