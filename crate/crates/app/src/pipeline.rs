//! Config-driven run of every stage, persisting each intermediate result.
//!
//! The stage functions are public so that the CLI subcommands and the HTTP
//! service go through exactly the same code as a full run.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eegpipe_core::classify::{
    cross_validate, fit_classifier, ClassifierSpec, CrossValidation, Metrics, TrainedClassifier,
};
use eegpipe_core::features::{extract_features, FeatureConfig, FeatureMatrix};
use eegpipe_core::preprocess::{
    apply_filter, design_lowpass, remove_artifacts, ComponentScore, IcaStageSpec, LowpassSpec,
    TrialIca,
};
use eegpipe_core::signal::{
    load_trialset, validate, write_trialset, TrialSet, TrialSetFormat, ValidationReport,
};
use eegpipe_core::{Error, Result};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::config::{EvaluationSpec, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Load,
    Validate,
    Lowpass,
    Ica,
    Features,
    Train,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Validate => "validate",
            Stage::Lowpass => "lowpass",
            Stage::Ica => "ica",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn load_stage(path: &Path, format: TrialSetFormat) -> StageResult<TrialSet> {
    let ts = load_trialset(path, format).at(Stage::Load)?;
    info!(
        trials = ts.len(),
        channels = ts.channels().len(),
        "loaded {}",
        path.display()
    );
    Ok(ts)
}

/// A report with errors fails the stage; warnings are only logged.
pub fn validate_stage(ts: &TrialSet) -> StageResult<ValidationReport> {
    let report = validate(ts);
    for w in report.warnings() {
        warn!("{}", w.message);
    }
    if !report.ok {
        let msgs: Vec<_> = report.errors().map(|i| i.message.as_str()).collect();
        return Err(Error::InvalidRecording(msgs.join("; "))).at(Stage::Validate);
    }
    Ok(report)
}

pub fn lowpass_stage(ts: &TrialSet, spec: &LowpassSpec) -> Result<TrialSet> {
    let kernel = design_lowpass(spec.cutoff_hz, ts.sample_rate_hz(), spec.taps)?;
    ts.map_trials(|t, r| {
        apply_filter(r, &kernel).map_err(|e| Error::Trial {
            trial: t,
            message: e.to_string(),
        })
    })
}

/// Per-trial ICA artifact removal. Trials are independent, so they are
/// spread over the available cores; results come back in trial order.
pub fn ica_stage(ts: &TrialSet, spec: &IcaStageSpec) -> Result<(Vec<TrialIca>, TrialSet)> {
    let trials = ts.trials();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(trials.len().max(1));
    let chunk = trials.len().div_ceil(workers).max(1);
    let results: Vec<Result<(TrialIca, _)>> = std::thread::scope(|s| {
        let handles: Vec<_> = trials
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, r)| {
                            remove_artifacts(r, spec).map_err(|e| Error::Trial {
                                trial: c * chunk + i,
                                message: e.to_string(),
                            })
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("ICA worker panicked"))
            .collect()
    });
    let mut icas = Vec::with_capacity(trials.len());
    let mut clean = Vec::with_capacity(trials.len());
    for r in results {
        let (ica, rec) = r?;
        icas.push(ica);
        clean.push(rec);
    }
    let unconverged = icas.iter().filter(|i| !i.model.converged).count();
    if unconverged > 0 {
        warn!(unconverged, "ICA hit the iteration cap on some trials");
    }
    let mut it = clean.into_iter();
    let clean = ts.map_trials(|_, _| Ok(it.next().expect("one result per trial")))?;
    Ok((icas, clean))
}

/// What `ica/trial_NNN.json` holds: the matrices and scores, not the activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaArtifact {
    pub trial: usize,
    pub converged: bool,
    pub iterations: usize,
    pub channel_means: Vec<f64>,
    pub unmixing: Vec<Vec<f64>>,
    pub mixing: Vec<Vec<f64>>,
    pub scores: Vec<ComponentScore>,
    pub rejected: Vec<usize>,
}

impl IcaArtifact {
    pub fn new(trial: usize, ica: &TrialIca) -> Self {
        IcaArtifact {
            trial,
            converged: ica.model.converged,
            iterations: ica.model.iterations,
            channel_means: ica.model.channel_means.clone(),
            unmixing: ica.model.unmixing.clone(),
            mixing: ica.model.mixing.clone(),
            scores: ica.scores.clone(),
            rejected: ica.rejected.clone(),
        }
    }
}

pub fn write_ica_artifacts(dir: &Path, icas: &[TrialIca]) -> Result<()> {
    for (t, ica) in icas.iter().enumerate() {
        write_json(
            &dir.join(format!("trial_{t:03}.json")),
            &IcaArtifact::new(t, ica),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaSummary {
    /// Rejected component indices, one list per trial.
    pub rejected: Vec<Vec<usize>>,
    pub total_rejected: usize,
    pub unconverged_trials: Vec<usize>,
}

impl IcaSummary {
    pub fn new(icas: &[TrialIca]) -> Self {
        IcaSummary {
            rejected: icas.iter().map(|i| i.rejected.clone()).collect(),
            total_rejected: icas.iter().map(|i| i.rejected.len()).sum(),
            unconverged_trials: icas
                .iter()
                .enumerate()
                .filter(|(_, i)| !i.model.converged)
                .map(|(t, _)| t)
                .collect(),
        }
    }
}

pub fn features_stage(ts: &TrialSet, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract_features(ts, cfg, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub rows: usize,
    pub columns: usize,
    pub class_count: usize,
    pub rows_per_class: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl FeatureSummary {
    pub fn new(fm: &FeatureMatrix) -> Self {
        let mut per_class = vec![0; fm.class_count()];
        for &l in fm.labels() {
            per_class[l] += 1;
        }
        FeatureSummary {
            rows: fm.n_rows(),
            columns: fm.n_features(),
            class_count: fm.class_count(),
            rows_per_class: per_class,
            feature_names: fm.feature_names().to_vec(),
        }
    }
}

pub fn train_stage(
    fm: &FeatureMatrix,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<TrainedClassifier> {
    let model = fit_classifier(fm, spec, seed)?;
    if let Some(loss) = model.loss_history().and_then(|h| h.last()) {
        info!(final_loss = loss, "trained {:?}", spec.kind());
    }
    Ok(model)
}

/// Training accuracy and cross-validation side by side. Either may be off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub training: Option<Metrics>,
    pub cross_validation: Option<CrossValidation>,
}

/// CV refits the model's own spec with the model's own seed, so evaluating a
/// saved model reproduces what a full run reports.
pub fn evaluate_stage(
    model: &TrainedClassifier,
    fm: &FeatureMatrix,
    spec: &EvaluationSpec,
) -> Result<EvaluationReport> {
    let training = if spec.report_training_accuracy {
        Some(model.evaluate(fm)?)
    } else {
        None
    };
    let cross_validation = match spec.cv_folds {
        Some(k) => Some(cross_validate(fm, &model.spec, k, model.seed)?),
        None => None,
    };
    if let Some(m) = &training {
        info!(accuracy = m.accuracy, "training accuracy");
    }
    if let Some(cv) = &cross_validation {
        info!(
            accuracy = cv.metrics.accuracy,
            folds = cv.folds,
            "cross-validated accuracy"
        );
    }
    Ok(EvaluationReport {
        training,
        cross_validation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub input: PathBuf,
    pub seed: u64,
    /// One entry per stage that ran, in order.
    pub timings: Vec<StageTiming>,
    pub validation: ValidationReport,
    pub ica: Option<IcaSummary>,
    pub features: FeatureSummary,
    pub metrics: EvaluationReport,
    /// Artifact name to path.
    pub artifacts: BTreeMap<String, PathBuf>,
}

pub mod artifact {
    pub const VALIDATION: &str = "validation.json";
    pub const FILTERED: &str = "filtered";
    pub const ICA: &str = "ica";
    pub const CLEAN: &str = "clean";
    pub const FEATURES: &str = "features.csv";
    pub const MODEL: &str = "model.json";
    pub const METRICS: &str = "metrics.json";
    pub const REPORT: &str = "report.json";
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> StageResult<T>) -> StageResult<T> {
        let start = Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        info!(%stage, seconds, "stage finished");
        self.timings.push(StageTiming { stage, seconds });
        out
    }
}

/// Run every configured stage, writing artifacts into `out` as they appear.
/// On failure the artifacts of the stages that finished stay on disk.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> StageResult<PipelineReport> {
    cfg.check().at(Stage::Config)?;
    let (input, format) = cfg.resolved_input().at(Stage::Config)?;
    fs::create_dir_all(out)
        .map_err(|e| Error::io(out, e))
        .at(Stage::Config)?;
    let mut artifacts = BTreeMap::new();
    let mut record = |name: &str| {
        let p = out.join(name);
        artifacts.insert(name.to_string(), p.clone());
        p
    };
    let mut timer = Timer {
        timings: Vec::new(),
    };

    let raw = timer.run(Stage::Load, || load_stage(&input, format))?;
    let validation = timer.run(Stage::Validate, || {
        let report = validate_stage(&raw)?;
        write_json(&out.join(artifact::VALIDATION), &report).at(Stage::Validate)?;
        Ok(report)
    })?;
    record(artifact::VALIDATION);

    let mut current = raw;
    if let Some(lp) = &cfg.preprocess.lowpass {
        let dir = record(artifact::FILTERED);
        current = timer.run(Stage::Lowpass, || {
            let filtered = lowpass_stage(&current, lp).at(Stage::Lowpass)?;
            write_trialset(&filtered, &dir).at(Stage::Lowpass)?;
            Ok(filtered)
        })?;
    }

    let mut ica_summary = None;
    if let Some(spec) = cfg.preprocess.ica.as_ref().filter(|i| i.enabled) {
        let ica_dir = record(artifact::ICA);
        let clean_dir = record(artifact::CLEAN);
        let (summary, clean) = timer.run(Stage::Ica, || {
            let (icas, clean) = ica_stage(&current, spec).at(Stage::Ica)?;
            write_ica_artifacts(&ica_dir, &icas).at(Stage::Ica)?;
            write_trialset(&clean, &clean_dir).at(Stage::Ica)?;
            Ok((IcaSummary::new(&icas), clean))
        })?;
        ica_summary = Some(summary);
        current = clean;
    }

    let features_path = record(artifact::FEATURES);
    let fm = timer.run(Stage::Features, || {
        let fm = features_stage(&current, &cfg.features).at(Stage::Features)?;
        fm.write_csv(&features_path).at(Stage::Features)?;
        Ok(fm)
    })?;

    let model_path = record(artifact::MODEL);
    let model = timer.run(Stage::Train, || {
        let model = train_stage(&fm, &cfg.classifier, cfg.seed).at(Stage::Train)?;
        model.save(&model_path).at(Stage::Train)?;
        Ok(model)
    })?;

    let metrics_path = record(artifact::METRICS);
    let metrics = timer.run(Stage::Evaluate, || {
        let m = evaluate_stage(&model, &fm, &cfg.evaluation).at(Stage::Evaluate)?;
        write_json(&metrics_path, &m).at(Stage::Evaluate)?;
        Ok(m)
    })?;

    let report_path = record(artifact::REPORT);
    let report = PipelineReport {
        input,
        seed: cfg.seed,
        timings: timer.timings,
        validation,
        ica: ica_summary,
        features: FeatureSummary::new(&fm),
        metrics,
        artifacts,
    };
    write_json(&report_path, &report).at(Stage::Evaluate)?;
    Ok(report)
}
