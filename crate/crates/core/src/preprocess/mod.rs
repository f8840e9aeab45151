//! Low-pass FIR filtering and ICA-based ocular artifact removal.

mod filter;
mod ica;

pub use filter::{apply_filter, design_lowpass, filter_samples, FilterKernel};
pub use ica::{
    demean, fast_ica, fast_ica_data, reject_components, score_components, select_rejections,
    whiten, ComponentScore, IcaConfig, IcaModel, Nonlinearity, Whitening, RANK_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Recording, TrialSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowpassSpec {
    pub cutoff_hz: f64,
    pub taps: usize,
}

impl Default for LowpassSpec {
    fn default() -> Self {
        LowpassSpec {
            cutoff_hz: 40.0,
            taps: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcaStageSpec {
    pub enabled: bool,
    /// Components whose |r| with the EOG channel exceeds this are rejected.
    pub threshold: f64,
    pub manual_reject: Vec<usize>,
    #[serde(flatten)]
    pub config: IcaConfig,
}

impl Default for IcaStageSpec {
    fn default() -> Self {
        IcaStageSpec {
            enabled: true,
            threshold: 0.7,
            manual_reject: Vec::new(),
            config: IcaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessSpec {
    pub lowpass: Option<LowpassSpec>,
    pub ica: Option<IcaStageSpec>,
}

impl PreprocessSpec {
    pub fn ica_enabled(&self) -> bool {
        self.ica.as_ref().is_some_and(|i| i.enabled)
    }

    pub fn is_noop(&self) -> bool {
        self.lowpass.is_none() && !self.ica_enabled()
    }
}

/// ICA fit of one trial with its EOG scores and the rejected components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialIca {
    pub model: IcaModel,
    /// Empty when the recording has no EOG channel.
    pub scores: Vec<ComponentScore>,
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub filtered: Option<Recording>,
    pub ica: Option<TrialIca>,
    pub clean: Recording,
}

/// Fit ICA on `r`, score it against the EOG channel (if any) and remix
/// without the components above threshold plus the manual list.
pub fn remove_artifacts(r: &Recording, spec: &IcaStageSpec) -> Result<(TrialIca, Recording)> {
    let model = fast_ica(r, &spec.config)?;
    let scores = match r.eog_index() {
        Some(i) => score_components(&model, &r.data()[i])?,
        None => Vec::new(),
    };
    let rejected = select_rejections(&scores, spec.threshold, &spec.manual_reject);
    let clean = reject_components(r, &model, &rejected)?;
    Ok((
        TrialIca {
            model,
            scores,
            rejected,
        },
        clean,
    ))
}

pub fn preprocess_trial(r: &Recording, spec: &PreprocessSpec) -> Result<TrialOutcome> {
    let filtered = match &spec.lowpass {
        Some(lp) => {
            let kernel = design_lowpass(lp.cutoff_hz, r.sample_rate_hz(), lp.taps)?;
            Some(apply_filter(r, &kernel)?)
        }
        None => None,
    };
    let input = filtered.as_ref().unwrap_or(r);
    let (ica, clean) = match spec.ica.as_ref().filter(|i| i.enabled) {
        Some(ica_spec) => {
            let (ica, clean) = remove_artifacts(input, ica_spec)?;
            (Some(ica), clean)
        }
        None => (None, input.clone()),
    };
    Ok(TrialOutcome {
        filtered,
        ica,
        clean,
    })
}

#[derive(Debug, Clone)]
pub struct PreprocessedSet {
    pub filtered: Option<TrialSet>,
    /// One entry per trial when ICA ran.
    pub ica: Vec<TrialIca>,
    pub clean: TrialSet,
}

pub fn preprocess_trialset(ts: &TrialSet, spec: &PreprocessSpec) -> Result<PreprocessedSet> {
    let mut filtered = Vec::new();
    let mut icas = Vec::new();
    let mut clean = Vec::new();
    for (t, r) in ts.trials().iter().enumerate() {
        let out = preprocess_trial(r, spec).map_err(|e| Error::Trial {
            trial: t,
            message: e.to_string(),
        })?;
        filtered.extend(out.filtered);
        icas.extend(out.ica);
        clean.push(out.clean);
    }
    let rebuild = |trials: Vec<Recording>| {
        TrialSet::new(
            ts.name(),
            ts.sample_rate_hz(),
            ts.channels().to_vec(),
            ts.label_table().to_vec(),
            trials,
            ts.labels().to_vec(),
        )
    };
    let filtered = if spec.lowpass.is_some() {
        Some(rebuild(filtered)?)
    } else {
        None
    };
    Ok(PreprocessedSet {
        filtered,
        ica: icas,
        clean: rebuild(clean)?,
    })
}
