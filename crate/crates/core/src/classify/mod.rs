//! From-scratch classifiers (k-NN, one-vs-rest linear SVM, MLP), feature
//! standardization, metrics and k-fold cross-validation.
//!
//! [`fit_classifier`] is the usual entry point: it fits a [`Standardizer`]
//! on the training rows and trains the requested model on the standardized
//! features. The `train_*` functions operate on whatever they are given.

mod knn;
mod metrics;
mod mlp;
mod standardize;
mod svm;

pub use knn::{predict_knn, train_knn, KnnModel, KnnParams};
pub use metrics::{evaluate, kfold_split, Fold, Metrics};
pub use mlp::{
    loss_and_gradients, mlp_loss, predict_mlp, train_mlp, MlpGradients, MlpModel, MlpParams,
};
pub use standardize::{fit_standardizer, Standardizer};
pub use svm::{predict_svm, train_svm, SvmModel, SvmParams};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Version of the saved-model JSON document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Mlp,
    Svm,
    Knn,
}

/// Classifier choice with hyperparameters; JSON form is
/// `{"kind": "mlp", "hyperparameters": {...}}` with any field defaulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum ClassifierSpec {
    Mlp(MlpParams),
    Svm(SvmParams),
    Knn(KnnParams),
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Mlp(MlpParams::default())
    }
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Mlp(_) => ClassifierKind::Mlp,
            ClassifierSpec::Svm(_) => ClassifierKind::Svm,
            ClassifierSpec::Knn(_) => ClassifierKind::Knn,
        }
    }

    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Mlp => ClassifierSpec::Mlp(MlpParams::default()),
            ClassifierKind::Svm => ClassifierSpec::Svm(SvmParams::default()),
            ClassifierKind::Knn => ClassifierSpec::Knn(KnnParams::default()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    kind: ClassifierKind,
    #[serde(default)]
    hyperparameters: serde_json::Value,
}

impl TryFrom<RawSpec> for ClassifierSpec {
    type Error = serde_json::Error;
    fn try_from(raw: RawSpec) -> std::result::Result<Self, Self::Error> {
        let hp = match raw.hyperparameters {
            serde_json::Value::Null => serde_json::Value::Object(Default::default()),
            v => v,
        };
        Ok(match raw.kind {
            ClassifierKind::Mlp => ClassifierSpec::Mlp(serde_json::from_value(hp)?),
            ClassifierKind::Svm => ClassifierSpec::Svm(serde_json::from_value(hp)?),
            ClassifierKind::Knn => ClassifierSpec::Knn(serde_json::from_value(hp)?),
        })
    }
}

impl From<ClassifierSpec> for RawSpec {
    fn from(spec: ClassifierSpec) -> Self {
        let kind = spec.kind();
        let hyperparameters = match spec {
            ClassifierSpec::Mlp(p) => serde_json::to_value(p),
            ClassifierSpec::Svm(p) => serde_json::to_value(p),
            ClassifierSpec::Knn(p) => serde_json::to_value(p),
        }
        .expect("plain structs serialize");
        RawSpec {
            kind,
            hyperparameters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierModel {
    Mlp(MlpModel),
    Svm(SvmModel),
    Knn(KnnModel),
}

/// A fitted model together with the standardization it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub class_count: usize,
    pub standardizer: Standardizer,
    pub spec: ClassifierSpec,
    pub seed: u64,
    pub model: ClassifierModel,
}

pub fn fit_classifier(
    train: &FeatureMatrix,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<TrainedClassifier> {
    let standardizer = fit_standardizer(train)?;
    let rows = standardizer.transform(train.values())?;
    let labels = train.labels();
    let k = train.class_count();
    let model = match spec {
        ClassifierSpec::Mlp(p) => ClassifierModel::Mlp(mlp::fit_rows(&rows, labels, k, p, seed)?),
        ClassifierSpec::Svm(p) => {
            ClassifierModel::Svm(svm::fit_rows(&rows, labels, k, p.lambda, p.epochs, seed)?)
        }
        ClassifierSpec::Knn(p) => ClassifierModel::Knn(knn::fit_rows(&rows, labels, k, p.k)?),
    };
    Ok(TrainedClassifier {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: train.feature_names().to_vec(),
        class_count: k,
        standardizer,
        spec: spec.clone(),
        seed,
        model,
    })
}

impl TrainedClassifier {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        let z = self.standardizer.transform(rows)?;
        match &self.model {
            ClassifierModel::Mlp(m) => predict_mlp(m, &z),
            ClassifierModel::Svm(m) => predict_svm(m, &z),
            ClassifierModel::Knn(m) => predict_knn(m, &z),
        }
    }

    pub fn evaluate(&self, fm: &FeatureMatrix) -> Result<Metrics> {
        if fm.feature_names() != self.feature_names.as_slice() {
            return Err(Error::InvalidParameter(
                "feature columns differ from the ones the model was trained on".into(),
            ));
        }
        evaluate(&self.predict(fm.values())?, fm.labels(), self.class_count)
    }

    pub fn loss_history(&self) -> Option<&[f64]> {
        match &self.model {
            ClassifierModel::Mlp(m) => Some(&m.loss_history),
            _ => None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: TrainedClassifier = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::format(path, e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported model format version {}", model.format_version),
            ));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: usize,
    /// Pooled over all held-out predictions.
    pub metrics: Metrics,
    pub fold_accuracies: Vec<f64>,
}

/// k-fold CV; the standardizer is refit on each fold's training rows.
pub fn cross_validate(
    fm: &FeatureMatrix,
    spec: &ClassifierSpec,
    folds: usize,
    seed: u64,
) -> Result<CrossValidation> {
    let splits = kfold_split(fm.n_rows(), folds, seed)?;
    let mut pred = vec![0usize; fm.n_rows()];
    let mut fold_accuracies = Vec::with_capacity(folds);
    for fold in &splits {
        let model = fit_classifier(&fm.select_rows(&fold.train), spec, seed)?;
        let test = fm.select_rows(&fold.test);
        let p = model.predict(test.values())?;
        fold_accuracies.push(evaluate(&p, test.labels(), fm.class_count())?.accuracy);
        for (&i, y) in fold.test.iter().zip(p) {
            pred[i] = y;
        }
    }
    Ok(CrossValidation {
        folds,
        metrics: evaluate(&pred, fm.labels(), fm.class_count())?,
        fold_accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shape() {
        let s: ClassifierSpec = serde_json::from_str(r#"{"kind":"knn"}"#).unwrap();
        assert_eq!(s, ClassifierSpec::Knn(KnnParams { k: 5 }));
        let s: ClassifierSpec =
            serde_json::from_str(r#"{"kind":"svm","hyperparameters":{"epochs":7}}"#).unwrap();
        assert_eq!(
            s,
            ClassifierSpec::Svm(SvmParams {
                lambda: 1e-3,
                epochs: 7
            })
        );
        let v = serde_json::to_value(ClassifierSpec::default()).unwrap();
        assert_eq!(v["kind"], "mlp");
        assert_eq!(v["hyperparameters"]["hidden"], 20);
        assert!(serde_json::from_str::<ClassifierSpec>(r#"{"kind":"tree"}"#).is_err());
    }
}
