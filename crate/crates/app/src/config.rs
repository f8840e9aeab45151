//! The JSON pipeline configuration.
//!
//! ```json
//! {
//!   "input": "data/manifest.json",
//!   "preprocess": {
//!     "lowpass": {"cutoff_hz": 40.0, "taps": 101},
//!     "ica": {"enabled": true, "threshold": 0.7, "manual_reject": []}
//!   },
//!   "features": {"bands": ["delta", "theta", "alpha", "beta", "gamma"]},
//!   "classifier": {"kind": "mlp", "hyperparameters": {"hidden": 20, "lr": 0.01}},
//!   "evaluation": {"report_training_accuracy": true, "cv_folds": 5},
//!   "seed": 7
//! }
//! ```
//!
//! Every field may be omitted. Without a `preprocess` block low-pass and ICA
//! both run with defaults. Once the block is given, only the stages it names
//! run, and `null` disables a stage explicitly.

use std::path::{Path, PathBuf};

use eegpipe_core::classify::ClassifierSpec;
use eegpipe_core::features::FeatureConfig;
use eegpipe_core::preprocess::{IcaStageSpec, LowpassSpec, PreprocessSpec};
use eegpipe_core::signal::TrialSetFormat;
use eegpipe_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSpec {
    pub report_training_accuracy: bool,
    pub cv_folds: Option<usize>,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        EvaluationSpec {
            report_training_accuracy: true,
            cv_folds: Some(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Manifest file, a directory holding `manifest.json`, or a packed file.
    pub input: Option<PathBuf>,
    /// Guessed from `input` when absent.
    pub input_format: Option<TrialSetFormat>,
    pub preprocess: PreprocessSpec,
    pub features: FeatureConfig,
    pub classifier: ClassifierSpec,
    pub evaluation: EvaluationSpec,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            input_format: None,
            preprocess: PreprocessSpec {
                lowpass: Some(LowpassSpec::default()),
                ica: Some(IcaStageSpec::default()),
            },
            features: FeatureConfig::default(),
            classifier: ClassifierSpec::default(),
            evaluation: EvaluationSpec::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Read a config; a relative `input` is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if let Some(input) = cfg.input.as_mut() {
            if input.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                *input = base.join(&*input);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        self.features.check()?;
        if let Some(ica) = &self.preprocess.ica {
            ica.config.check()?;
            if !(0.0..=1.0).contains(&ica.threshold) {
                return Err(Error::InvalidParameter(format!(
                    "ICA threshold must lie in [0, 1], got {}",
                    ica.threshold
                )));
            }
        }
        if let Some(k) = self.evaluation.cv_folds {
            if k < 2 {
                return Err(Error::InvalidParameter(format!(
                    "cv_folds must be ≥ 2, got {k}"
                )));
            }
        }
        Ok(())
    }

    /// The input path and its format, after resolving a directory to its manifest.
    pub fn resolved_input(&self) -> Result<(PathBuf, TrialSetFormat)> {
        let input = self
            .input
            .clone()
            .ok_or_else(|| Error::InvalidParameter("no input dataset configured".into()))?;
        Ok(resolve_input(&input, self.input_format))
    }
}

pub fn resolve_input(path: &Path, format: Option<TrialSetFormat>) -> (PathBuf, TrialSetFormat) {
    let path = if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    };
    let format = format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("json") => TrialSetFormat::CsvManifest,
        _ => TrialSetFormat::PackedBinary,
    });
    (path, format)
}
