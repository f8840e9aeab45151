//! `eegpipe` command line. Every subcommand runs one pipeline stage through
//! the same functions as `pipeline`, so chaining them over the persisted
//! intermediates gives the same numbers as a full run.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eegpipe_core::classify::TrainedClassifier;
use eegpipe_core::features::FeatureMatrix;
use eegpipe_core::preprocess::IcaStageSpec;
use eegpipe_core::signal::{write_trialset, TrialSet, TrialSetFormat};
use eegpipe_core::Error;
use tracing_subscriber::EnvFilter;

use crate::config::{resolve_input, PipelineConfig};
use crate::fixture::{generate_fixture, write_fixture};
use crate::pipeline::{
    artifact, evaluate_stage, features_stage, ica_stage, load_stage, lowpass_stage, run_pipeline,
    train_stage, validate_stage, write_ica_artifacts, write_json, AtStage, Stage, StageError,
};

pub const LOG_ENV: &str = "EEGSIG_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "eegpipe",
    version,
    about = "EEG preprocessing, feature extraction and classification"
)]
pub struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, or output file for features/train/evaluate.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// error, warn, info, debug or trace. EEGSIG_LOG takes precedence.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Packed,
}

impl From<FormatArg> for TrialSetFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => TrialSetFormat::CsvManifest,
            FormatArg::Packed => TrialSetFormat::PackedBinary,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset to read instead of the config's `input`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset and write validation.json.
    Validate(InputArgs),
    /// Low-pass and ICA as configured; writes filtered/, ica/ and clean/.
    Preprocess(InputArgs),
    /// ICA artifact removal only; writes ica/ and clean/.
    Ica(InputArgs),
    /// Feature matrix CSV. With --input the dataset is taken as already
    /// preprocessed; otherwise the config's input goes through the
    /// configured preprocessing first.
    Features(InputArgs),
    /// Fit the configured classifier on a feature CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
    },
    /// Training accuracy and cross-validation for a saved model.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Every stage in one go; writes all artifacts and report.json.
    Pipeline,
    /// Write the synthetic five-task dataset.
    GenerateFixture {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// HTTP service for interactive analysis.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory where classification runs are persisted.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

fn init_logging(level: &str) {
    let filter = std::env::var(LOG_ENV)
        .ok()
        .and_then(|v| EnvFilter::try_new(v).ok())
        .or_else(|| EnvFilter::try_new(level).ok())
        .unwrap_or_else(|| EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, StageError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).at(Stage::Config)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_input(cfg: &PipelineConfig, args: &InputArgs) -> Result<TrialSet, StageError> {
    let format = args.format.map(Into::into);
    let (path, format) = match &args.input {
        Some(p) => resolve_input(p, format.or(cfg.input_format)),
        None => {
            let mut c = cfg.clone();
            c.input_format = format.or(c.input_format);
            c.resolved_input().at(Stage::Config)?
        }
    };
    let ts = load_stage(&path, format)?;
    validate_stage(&ts)?;
    Ok(ts)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn out_file(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn ica_spec(cfg: &PipelineConfig) -> IcaStageSpec {
    cfg.preprocess.ica.clone().unwrap_or_default()
}

fn run_ica(ts: &TrialSet, spec: &IcaStageSpec, out: &Path) -> Result<TrialSet, StageError> {
    let (icas, clean) = ica_stage(ts, spec).at(Stage::Ica)?;
    write_ica_artifacts(&out.join(artifact::ICA), &icas).at(Stage::Ica)?;
    write_trialset(&clean, &out.join(artifact::CLEAN)).at(Stage::Ica)?;
    Ok(clean)
}

/// The configured low-pass and ICA, writing their artifacts under `out`.
fn run_preprocess(
    cfg: &PipelineConfig,
    ts: TrialSet,
    out: Option<&Path>,
) -> Result<TrialSet, StageError> {
    let mut current = ts;
    if let Some(lp) = &cfg.preprocess.lowpass {
        current = lowpass_stage(&current, lp).at(Stage::Lowpass)?;
        if let Some(out) = out {
            write_trialset(&current, &out.join(artifact::FILTERED)).at(Stage::Lowpass)?;
        }
    }
    if let Some(spec) = cfg.preprocess.ica.as_ref().filter(|i| i.enabled) {
        current = match out {
            Some(out) => run_ica(&current, spec, out)?,
            None => ica_stage(&current, spec).at(Stage::Ica)?.1,
        };
    }
    Ok(current)
}

fn read_features(path: &Path) -> Result<FeatureMatrix, StageError> {
    FeatureMatrix::read_csv(path, None).at(Stage::Load)
}

pub fn run(cli: &Cli) -> Result<(), StageError> {
    match &cli.command {
        Command::Validate(args) => {
            let cfg = load_config(cli)?;
            let ts = load_input(&cfg, args)?;
            let report = eegpipe_core::signal::validate(&ts);
            let path = out_dir(cli).join(artifact::VALIDATION);
            write_json(&path, &report).at(Stage::Validate)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
        }
        Command::Preprocess(args) => {
            let cfg = load_config(cli)?;
            let ts = load_input(&cfg, args)?;
            run_preprocess(&cfg, ts, Some(&out_dir(cli)))?;
        }
        Command::Ica(args) => {
            let cfg = load_config(cli)?;
            let ts = load_input(&cfg, args)?;
            run_ica(&ts, &ica_spec(&cfg), &out_dir(cli))?;
        }
        Command::Features(args) => {
            let cfg = load_config(cli)?;
            let ts = load_input(&cfg, args)?;
            let ts = if args.input.is_some() {
                ts
            } else {
                run_preprocess(&cfg, ts, None)?
            };
            let fm = features_stage(&ts, &cfg.features).at(Stage::Features)?;
            fm.write_csv(&out_file(cli, artifact::FEATURES))
                .at(Stage::Features)?;
        }
        Command::Train { features } => {
            let cfg = load_config(cli)?;
            let fm = read_features(features)?;
            let model = train_stage(&fm, &cfg.classifier, cfg.seed).at(Stage::Train)?;
            model
                .save(&out_file(cli, artifact::MODEL))
                .at(Stage::Train)?;
        }
        Command::Evaluate { features, model } => {
            let cfg = load_config(cli)?;
            let fm = read_features(features)?;
            let model = TrainedClassifier::load(model).at(Stage::Load)?;
            let metrics = evaluate_stage(&model, &fm, &cfg.evaluation).at(Stage::Evaluate)?;
            write_json(&out_file(cli, artifact::METRICS), &metrics).at(Stage::Evaluate)?;
        }
        Command::Pipeline => {
            let cfg = load_config(cli)?;
            let report = run_pipeline(&cfg, &out_dir(cli))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report.metrics).expect("metrics serialize")
            );
        }
        Command::GenerateFixture {
            classes,
            per_class,
            format,
        } => {
            let ts =
                generate_fixture(*classes, *per_class, cli.seed.unwrap_or(0)).at(Stage::Config)?;
            let path = write_fixture(&ts, &out_dir(cli), (*format).into()).at(Stage::Config)?;
            println!("{}", path.display());
        }
        Command::Serve { bind, state_dir } => {
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| Error::io("tokio runtime", e))
                .at(Stage::Config)?;
            runtime
                .block_on(crate::service::serve(*bind, state_dir.clone()))
                .map_err(|e| Error::io(bind.to_string(), e))
                .at(Stage::Config)?;
        }
    }
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.log_level);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
