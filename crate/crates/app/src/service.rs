//! JSON-over-HTTP session API for interactive analysis.
//!
//! Each session holds the output of every stage that has run. Posting to a
//! stage replaces its output and drops everything downstream of it.
//! Mutations on one session are serialized by a per-session write lock;
//! reads share it. Numeric work runs on the blocking thread pool.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/sessions` | |
//! | POST | `/sessions/{id}/dataset` | `{path, format?}` or `{upload: {...}}` |
//! | GET | `/sessions/{id}/channels/{name}` | `trial, from, to, stage` |
//! | POST | `/sessions/{id}/filter` | `{cutoff_hz, taps}` |
//! | POST | `/sessions/{id}/ica` | ICA config, `threshold`, `manual_reject` |
//! | GET | `/sessions/{id}/ica/components` | `trial` |
//! | POST | `/sessions/{id}/ica/reject` | `{indices, trial?}` |
//! | GET | `/sessions/{id}/bands/{band}` | `channel, trial, stage` |
//! | GET | `/sessions/{id}/spectrum` | `channel, trial, stage` |
//! | POST | `/sessions/{id}/features` | feature config |
//! | GET | `/sessions/{id}/features` | `offset, limit` |
//! | POST | `/sessions/{id}/classify` | `{kind, hyperparameters, cv_folds, seed}` |
//! | GET | `/sessions/{id}/runs/{run}` | |
//!
//! Errors come back as `{"error": message, "status": code}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use eegpipe_core::classify::{
    ClassifierKind, ClassifierSpec, CrossValidation, Metrics, TrainedClassifier,
};
use eegpipe_core::features::{FeatureConfig, FeatureMatrix};
use eegpipe_core::preprocess::{
    reject_components, ComponentScore, IcaStageSpec, LowpassSpec, TrialIca,
};
use eegpipe_core::signal::{
    channel_names, load_trialset, slice_channel, validate, Recording, TaskLabel, TrialSet,
    TrialSetFormat, ValidationReport,
};
use eegpipe_core::spectral::{power_spectrum, SpectrumResult};
use eegpipe_core::wavelet::{band_map, db4_pair, decompose, reconstruct_band, BandName};
use eegpipe_core::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tracing::info;

use crate::config::{resolve_input, EvaluationSpec};
use crate::pipeline::{
    evaluate_stage, features_stage, ica_stage, lowpass_stage, train_stage, write_json,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    /// Caller mistakes become 400/404; anything else is a 500 tagged with the stage.
    fn from_core(stage: &str, e: Error) -> Self {
        let status = match &e {
            Error::UnknownChannel(_) | Error::BandNotMapped(_) => StatusCode::NOT_FOUND,
            Error::Io { .. }
            | Error::Format { .. }
            | Error::Trial { .. }
            | Error::InvalidRecording(_)
            | Error::WindowOutOfRange { .. }
            | Error::InvalidParameter(_)
            | Error::EmptyInput
            | Error::LengthMismatch { .. }
            | Error::SampleRateMismatch { .. }
            | Error::ComponentOutOfRange { .. }
            | Error::LabelOutOfRange { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, format!("{stage}: {e}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": self.message, "status": self.status.as_u16()});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// A JSON body where an empty body means `{}`.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        body
    };
    serde_json::from_slice(text)
        .map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn parse_query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request(format!("malformed query: {}", e.body_text())))
}

async fn blocking<T, F>(stage: &'static str, f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> eegpipe_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| {
            ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                format!("{stage}: worker failed: {e}"),
            )
        })?
        .map_err(|e| ApiError::from_core(stage, e))
}

// ---------------------------------------------------------------------------
// Session state

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageName {
    #[default]
    Raw,
    Filtered,
    Clean,
}

#[derive(Debug, Clone)]
struct IcaState {
    /// Recordings the decomposition was fitted on, kept for re-rejection.
    input: Arc<TrialSet>,
    fits: Vec<TrialIca>,
}

/// A finished classification run, as returned by `GET runs/{run}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub session: u64,
    pub spec: ClassifierSpec,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub training: Option<Metrics>,
    pub cross_validation: Option<CrossValidation>,
    /// Mean training loss per epoch; MLP only.
    pub loss_history: Option<Vec<f64>>,
}

#[derive(Debug, Default)]
struct Session {
    dataset: Option<Arc<TrialSet>>,
    filter: Option<LowpassSpec>,
    filtered: Option<Arc<TrialSet>>,
    ica: Option<IcaState>,
    clean: Option<Arc<TrialSet>>,
    features: Option<Arc<FeatureMatrix>>,
    runs: Vec<(RunRecord, TrainedClassifier)>,
}

impl Session {
    fn dataset(&self) -> Result<&Arc<TrialSet>, ApiError> {
        self.dataset
            .as_ref()
            .ok_or_else(|| ApiError::conflict("no dataset loaded; POST /dataset first"))
    }

    fn stage(&self, stage: StageName) -> Result<&Arc<TrialSet>, ApiError> {
        match stage {
            StageName::Raw => self.dataset(),
            StageName::Filtered => self
                .filtered
                .as_ref()
                .ok_or_else(|| ApiError::conflict("no filtered data; POST /filter first")),
            StageName::Clean => self
                .clean
                .as_ref()
                .ok_or_else(|| ApiError::conflict("no clean data; POST /ica first")),
        }
    }

    /// Latest preprocessing output: clean, else filtered, else raw.
    fn latest(&self) -> Result<&Arc<TrialSet>, ApiError> {
        match (&self.clean, &self.filtered) {
            (Some(c), _) => Ok(c),
            (None, Some(f)) => Ok(f),
            _ => self.dataset(),
        }
    }

    fn clear_from_filter(&mut self) {
        self.filter = None;
        self.filtered = None;
        self.clear_from_ica();
    }

    fn clear_from_ica(&mut self) {
        self.ica = None;
        self.clean = None;
        self.clear_from_features();
    }

    fn clear_from_features(&mut self) {
        self.features = None;
        self.runs.clear();
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<u64, Arc<RwLock<Session>>>>,
    next_session: AtomicU64,
    state_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(state_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            sessions: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            state_dir,
        })
    }

    async fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>, ApiError> {
        let unknown = || ApiError::not_found(format!("unknown session '{id}'"));
        let id: u64 = id.parse().map_err(|_| unknown())?;
        self.sessions
            .read()
            .await
            .get(&id)
            .cloned()
            .ok_or_else(unknown)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/dataset", post(post_dataset))
        .route("/sessions/{id}/channels/{name}", get(get_channel))
        .route("/sessions/{id}/filter", post(post_filter))
        .route("/sessions/{id}/ica", post(post_ica))
        .route("/sessions/{id}/ica/components", get(get_components))
        .route("/sessions/{id}/ica/reject", post(post_reject))
        .route("/sessions/{id}/bands/{band}", get(get_band))
        .route("/sessions/{id}/spectrum", get(get_spectrum))
        .route(
            "/sessions/{id}/features",
            post(post_features).get(get_features),
        )
        .route("/sessions/{id}/classify", post(post_classify))
        .route("/sessions/{id}/runs/{run}", get(get_run))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

pub async fn serve(bind: SocketAddr, state_dir: Option<PathBuf>) -> std::io::Result<()> {
    if let Some(dir) = &state_dir {
        std::fs::create_dir_all(dir)?;
    }
    let listener = tokio::net::TcpListener::bind(bind).await?;
    info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(state_dir)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

// ---------------------------------------------------------------------------
// Handlers

async fn create_session(State(app): State<Arc<AppState>>) -> impl IntoResponse {
    let id = app.next_session.fetch_add(1, Ordering::SeqCst);
    app.sessions
        .write()
        .await
        .insert(id, Arc::new(RwLock::new(Session::default())));
    (StatusCode::CREATED, Json(json!({"id": id})))
}

/// A dataset sent in the request body instead of read from disk.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadedDataset {
    #[serde(default)]
    pub name: String,
    pub sample_rate_hz: f64,
    pub channels: Vec<String>,
    pub labels: Vec<TaskLabel>,
    pub trials: Vec<UploadedTrial>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadedTrial {
    pub label_id: usize,
    /// channels × samples
    pub data: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRequest {
    path: Option<PathBuf>,
    format: Option<TrialSetFormat>,
    upload: Option<UploadedDataset>,
}

fn build_upload(u: UploadedDataset) -> eegpipe_core::Result<TrialSet> {
    let ch = channel_names(&u.channels)?;
    let mut trials = Vec::with_capacity(u.trials.len());
    let mut labels = Vec::with_capacity(u.trials.len());
    for (t, trial) in u.trials.into_iter().enumerate() {
        let label = u
            .labels
            .iter()
            .find(|l| l.id == trial.label_id)
            .cloned()
            .ok_or_else(|| Error::Trial {
                trial: t,
                message: format!("label {} not in label table", trial.label_id),
            })?;
        let rec =
            Recording::new(u.sample_rate_hz, ch.clone(), trial.data).map_err(|e| Error::Trial {
                trial: t,
                message: e.to_string(),
            })?;
        trials.push(rec);
        labels.push(label);
    }
    TrialSet::new(u.name, u.sample_rate_hz, ch, u.labels, trials, labels)
}

#[derive(Debug, Serialize)]
struct DatasetInfo {
    name: String,
    trials: usize,
    channels: Vec<String>,
    sample_rate_hz: f64,
    samples_per_trial: Vec<usize>,
    labels: Vec<TaskLabel>,
    trial_labels: Vec<usize>,
    validation: ValidationReport,
}

async fn post_dataset(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<DatasetInfo> {
    let session = app.session(&id).await?;
    let req: DatasetRequest = parse_body(&body)?;
    let ts = match (req.path, req.upload) {
        (Some(path), None) => {
            let (path, format) = resolve_input(&path, req.format);
            blocking("load", move || load_trialset(&path, format)).await?
        }
        (None, Some(upload)) => blocking("load", move || build_upload(upload)).await?,
        _ => {
            return Err(ApiError::bad_request(
                "give exactly one of 'path' and 'upload'",
            ))
        }
    };
    let info = DatasetInfo {
        name: ts.name().to_string(),
        trials: ts.len(),
        channels: ts
            .channels()
            .iter()
            .map(|c| c.as_str().to_string())
            .collect(),
        sample_rate_hz: ts.sample_rate_hz(),
        samples_per_trial: ts.trials().iter().map(Recording::n_samples).collect(),
        labels: ts.label_table().to_vec(),
        trial_labels: ts.label_ids(),
        validation: validate(&ts),
    };
    let mut s = session.write().await;
    *s = Session {
        dataset: Some(Arc::new(ts)),
        ..Session::default()
    };
    Ok(Json(info))
}

fn trial_of(ts: &TrialSet, trial: usize) -> Result<&Recording, ApiError> {
    ts.trials().get(trial).ok_or_else(|| {
        ApiError::not_found(format!(
            "trial {trial} out of range for {} trials",
            ts.len()
        ))
    })
}

#[derive(Debug, Deserialize)]
struct ChannelQuery {
    #[serde(default)]
    trial: usize,
    from: Option<usize>,
    to: Option<usize>,
    #[serde(default)]
    stage: StageName,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChannelWindow {
    pub channel: String,
    pub trial: usize,
    pub stage: StageName,
    pub from: usize,
    pub to: usize,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

async fn get_channel(
    State(app): State<Arc<AppState>>,
    Path((id, name)): Path<(String, String)>,
    q: Result<Query<ChannelQuery>, QueryRejection>,
) -> ApiResult<ChannelWindow> {
    let q = parse_query(q)?;
    let session = app.session(&id).await?;
    let s = session.read().await;
    let r = trial_of(s.stage(q.stage)?, q.trial)?;
    let from = q.from.unwrap_or(0);
    let to = q.to.unwrap_or(r.n_samples());
    let samples =
        slice_channel(r, &name, from, to).map_err(|e| ApiError::from_core("channels", e))?;
    Ok(Json(ChannelWindow {
        channel: name,
        trial: q.trial,
        stage: q.stage,
        from,
        to,
        sample_rate_hz: r.sample_rate_hz(),
        samples,
    }))
}

async fn post_filter(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Value> {
    let spec: LowpassSpec = parse_body(&body)?;
    let session = app.session(&id).await?;
    let mut s = session.write().await;
    let raw = s.dataset()?.clone();
    let spec2 = spec.clone();
    let filtered = blocking("filter", move || lowpass_stage(&raw, &spec2)).await?;
    let trials = filtered.len();
    s.clear_from_filter();
    s.filter = Some(spec.clone());
    s.filtered = Some(Arc::new(filtered));
    Ok(Json(
        json!({"trials": trials, "cutoff_hz": spec.cutoff_hz, "taps": spec.taps}),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IcaTrialSummary {
    pub trial: usize,
    pub converged: bool,
    pub iterations: usize,
    pub scores: Vec<ComponentScore>,
    pub rejected: Vec<usize>,
}

fn ica_summaries(fits: &[TrialIca]) -> Vec<IcaTrialSummary> {
    fits.iter()
        .enumerate()
        .map(|(t, f)| IcaTrialSummary {
            trial: t,
            converged: f.model.converged,
            iterations: f.model.iterations,
            scores: f.scores.clone(),
            rejected: f.rejected.clone(),
        })
        .collect()
}

async fn post_ica(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Value> {
    let mut spec: IcaStageSpec = parse_body(&body)?;
    spec.enabled = true;
    spec.config
        .check()
        .map_err(|e| ApiError::from_core("ica", e))?;
    let session = app.session(&id).await?;
    let mut s = session.write().await;
    let input = match &s.filtered {
        Some(f) => f.clone(),
        None => s.dataset()?.clone(),
    };
    let fit_input = input.clone();
    let (fits, clean) = blocking("ica", move || ica_stage(&fit_input, &spec)).await?;
    let summaries = ica_summaries(&fits);
    s.clear_from_ica();
    s.ica = Some(IcaState { input, fits });
    s.clean = Some(Arc::new(clean));
    Ok(Json(json!({ "trials": summaries })))
}

#[derive(Debug, Deserialize)]
struct TrialQuery {
    #[serde(default)]
    trial: usize,
}

async fn get_components(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<TrialQuery>, QueryRejection>,
) -> ApiResult<Value> {
    let q = parse_query(q)?;
    let session = app.session(&id).await?;
    let s = session.read().await;
    let ica = s
        .ica
        .as_ref()
        .ok_or_else(|| ApiError::conflict("ICA has not been run; POST /ica first"))?;
    let fit = ica.fits.get(q.trial).ok_or_else(|| {
        ApiError::not_found(format!(
            "trial {} out of range for {} trials",
            q.trial,
            ica.fits.len()
        ))
    })?;
    Ok(Json(json!({
        "trial": q.trial,
        "converged": fit.model.converged,
        "iterations": fit.model.iterations,
        "activations": fit.model.activations,
        "mixing": fit.model.mixing,
        "scores": fit.scores,
        "rejected": fit.rejected,
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RejectRequest {
    indices: Vec<usize>,
    /// All trials when absent.
    trial: Option<usize>,
}

async fn post_reject(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Value> {
    let req: RejectRequest = parse_body(&body)?;
    let session = app.session(&id).await?;
    let mut s = session.write().await;
    let ica = s
        .ica
        .as_mut()
        .ok_or_else(|| ApiError::conflict("ICA has not been run; POST /ica first"))?;
    let trials: Vec<usize> = match req.trial {
        Some(t) if t >= ica.fits.len() => {
            return Err(ApiError::bad_request(format!(
                "trial {t} out of range for {} trials",
                ica.fits.len()
            )))
        }
        Some(t) => vec![t],
        None => (0..ica.fits.len()).collect(),
    };
    let mut indices = req.indices.clone();
    indices.sort_unstable();
    indices.dedup();
    for &t in &trials {
        let n = ica.fits[t].model.n_components();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(ApiError::bad_request(format!(
                "component index {bad} out of range for {n} components (trial {t})"
            )));
        }
    }
    let clean = s.clean.clone().expect("clean exists whenever ICA does");
    let ica = s.ica.as_ref().expect("checked above");
    let input = ica.input.clone();
    let models: Vec<_> = trials
        .iter()
        .map(|&t| (t, ica.fits[t].model.clone()))
        .collect();
    let idx = indices.clone();
    let clean = blocking("ica", move || {
        let mut replaced: HashMap<usize, Recording> = HashMap::new();
        for (t, m) in &models {
            replaced.insert(*t, reject_components(&input.trials()[*t], m, &idx)?);
        }
        clean.map_trials(|t, r| Ok(replaced.remove(&t).unwrap_or_else(|| r.clone())))
    })
    .await?;
    let ica = s.ica.as_mut().expect("checked above");
    for &t in &trials {
        ica.fits[t].rejected = indices.clone();
    }
    let rejected: Vec<Vec<usize>> = ica.fits.iter().map(|f| f.rejected.clone()).collect();
    s.clean = Some(Arc::new(clean));
    s.clear_from_features();
    Ok(Json(json!({ "rejected": rejected })))
}

#[derive(Debug, Deserialize)]
struct ViewQuery {
    channel: String,
    #[serde(default)]
    trial: usize,
    stage: Option<StageName>,
}

impl ViewQuery {
    /// The explicit stage, or the latest preprocessing output.
    fn pick<'a>(&self, s: &'a Session) -> Result<(StageName, &'a Arc<TrialSet>), ApiError> {
        match self.stage {
            Some(stage) => Ok((stage, s.stage(stage)?)),
            None => {
                let ts = s.latest()?;
                let stage = if s.clean.is_some() {
                    StageName::Clean
                } else if s.filtered.is_some() {
                    StageName::Filtered
                } else {
                    StageName::Raw
                };
                Ok((stage, ts))
            }
        }
    }
}

async fn get_band(
    State(app): State<Arc<AppState>>,
    Path((id, band)): Path<(String, String)>,
    q: Result<Query<ViewQuery>, QueryRejection>,
) -> ApiResult<Value> {
    let q = parse_query(q)?;
    let name = BandName::from_str(&band)
        .map_err(|_| ApiError::not_found(format!("unknown band '{band}'")))?;
    let session = app.session(&id).await?;
    let s = session.read().await;
    let (stage, ts) = q.pick(&s)?;
    let r = trial_of(ts, q.trial)?;
    let x = r
        .channel(&q.channel)
        .map_err(|e| ApiError::from_core("bands", e))?;
    let map = band_map(r.sample_rate_hz(), 5).map_err(|e| ApiError::from_core("bands", e))?;
    let rb = map
        .get(name)
        .ok_or_else(|| ApiError::not_found(format!("band '{band}' is not mapped")))?;
    let pair = db4_pair();
    let samples = decompose(x, r.sample_rate_hz(), map.levels, &pair)
        .and_then(|d| reconstruct_band(&d, rb, &pair))
        .map_err(|e| ApiError::from_core("bands", e))?;
    Ok(Json(json!({
        "band": rb,
        "channel": q.channel,
        "trial": q.trial,
        "stage": stage,
        "sample_rate_hz": r.sample_rate_hz(),
        "samples": samples,
    })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpectrumView {
    pub channel: String,
    pub trial: usize,
    pub stage: StageName,
    pub peak_frequency_hz: f64,
    #[serde(flatten)]
    pub spectrum: SpectrumResult,
}

async fn get_spectrum(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<ViewQuery>, QueryRejection>,
) -> ApiResult<SpectrumView> {
    let q = parse_query(q)?;
    let session = app.session(&id).await?;
    let s = session.read().await;
    let (stage, ts) = q.pick(&s)?;
    let r = trial_of(ts, q.trial)?;
    let x = r
        .channel(&q.channel)
        .map_err(|e| ApiError::from_core("spectrum", e))?;
    let spectrum =
        power_spectrum(x, r.sample_rate_hz()).map_err(|e| ApiError::from_core("spectrum", e))?;
    Ok(Json(SpectrumView {
        channel: q.channel.clone(),
        trial: q.trial,
        stage,
        peak_frequency_hz: spectrum.peak_frequency_hz(),
        spectrum,
    }))
}

async fn post_features(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Value> {
    let cfg: FeatureConfig = parse_body(&body)?;
    cfg.check()
        .map_err(|e| ApiError::from_core("features", e))?;
    let session = app.session(&id).await?;
    let mut s = session.write().await;
    let input = s.latest()?.clone();
    let fm = blocking("features", move || features_stage(&input, &cfg)).await?;
    let out = json!({"rows": fm.n_rows(), "columns": fm.n_features(), "names": fm.feature_names()});
    s.clear_from_features();
    s.features = Some(Arc::new(fm));
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

async fn get_features(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<PageQuery>, QueryRejection>,
) -> ApiResult<Value> {
    let q = parse_query(q)?;
    let session = app.session(&id).await?;
    let s = session.read().await;
    let fm = s.features.as_ref().ok_or_else(|| {
        ApiError::conflict("features have not been computed; POST /features first")
    })?;
    let from = q.offset.min(fm.n_rows());
    let to = q
        .limit
        .map_or(fm.n_rows(), |l| from.saturating_add(l).min(fm.n_rows()));
    Ok(Json(json!({
        "names": fm.feature_names(),
        "total_rows": fm.n_rows(),
        "offset": from,
        "rows": &fm.values()[from..to],
        "labels": &fm.labels()[from..to],
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyRequest {
    kind: ClassifierKind,
    #[serde(default)]
    hyperparameters: Value,
    #[serde(default)]
    cv_folds: Option<usize>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "yes")]
    report_training_accuracy: bool,
}

fn yes() -> bool {
    true
}

async fn post_classify(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<RunRecord> {
    let req: ClassifyRequest = parse_body(&body)?;
    let spec: ClassifierSpec =
        serde_json::from_value(json!({"kind": req.kind, "hyperparameters": req.hyperparameters}))
            .map_err(|e| ApiError::bad_request(format!("bad hyperparameters: {e}")))?;
    if let Some(k) = req.cv_folds {
        if k < 2 {
            return Err(ApiError::bad_request(format!(
                "cv_folds must be ≥ 2, got {k}"
            )));
        }
    }
    let session_id: u64 = id
        .parse()
        .map_err(|_| ApiError::not_found(format!("unknown session '{id}'")))?;
    let session = app.session(&id).await?;
    let mut s = session.write().await;
    let fm = s.features.clone().ok_or_else(|| {
        ApiError::conflict("features have not been computed; POST /features first")
    })?;
    let eval = EvaluationSpec {
        report_training_accuracy: req.report_training_accuracy,
        cv_folds: req.cv_folds,
    };
    let seed = req.seed;
    let spec2 = spec.clone();
    let (model, metrics) = blocking("classify", move || {
        let model = train_stage(&fm, &spec2, seed)?;
        let metrics = evaluate_stage(&model, &fm, &eval)?;
        Ok((model, metrics))
    })
    .await?;
    let record = RunRecord {
        run: s.runs.len() as u64 + 1,
        session: session_id,
        spec,
        seed,
        feature_names: model.feature_names.clone(),
        training: metrics.training,
        cross_validation: metrics.cross_validation,
        loss_history: model.loss_history().map(<[f64]>::to_vec),
    };
    if let Some(dir) = &app.state_dir {
        persist_run(dir, &record).map_err(|e| ApiError::from_core("classify", e))?;
    }
    s.runs.push((record.clone(), model));
    Ok(Json(record))
}

fn persist_run(dir: &FsPath, record: &RunRecord) -> eegpipe_core::Result<()> {
    let path = dir
        .join(format!("session_{}", record.session))
        .join(format!("run_{}.json", record.run));
    write_json(&path, record)
}

async fn get_run(
    State(app): State<Arc<AppState>>,
    Path((id, run)): Path<(String, String)>,
) -> ApiResult<RunRecord> {
    let session = app.session(&id).await?;
    let s = session.read().await;
    if s.runs.is_empty() {
        return Err(ApiError::conflict(
            "no classifier has been trained; POST /classify first",
        ));
    }
    run.parse::<u64>()
        .ok()
        .and_then(|n| s.runs.iter().find(|(r, _)| r.run == n))
        .map(|(r, _)| Json(r.clone()))
        .ok_or_else(|| ApiError::not_found(format!("unknown run '{run}'")))
}
