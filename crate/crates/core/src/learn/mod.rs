//! Train/test splitting, stratified cross-validation and the classifier
//! roster behind a single fit/predict/evaluate contract.

mod cv;
mod discriminant;
mod eval;
pub(crate) mod forest;
mod knn;
mod mlr;
mod model;
mod split;
mod svm;

pub use cv::kfold_cv;
pub use discriminant::{LdaModel, QdaModel};
pub use eval::{accuracy, evaluate, CvReport, EvalReport, TestReport};
pub use forest::{Forest, Node, Tree};
pub use knn::KnnModel;
pub use mlr::{mlr_objective, MlrModel};
pub use model::{fit_classifier, predict, FittedParams, Prediction, TrainedModel, MODEL_SCHEMA};
pub use split::{stratified_folds, stratified_split};
pub use svm::{BinarySvm, Kernel, SvmModel};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LearnError {
    #[error("class {class} has {count} sample(s); at least {needed} required")]
    ClassTooSmall { class: usize, count: usize, needed: usize },
    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("class {0} has no training samples")]
    EmptyClass(usize),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("{kind} optimization failed: {reason}")]
    OptimizationFailed { kind: ModelKind, reason: String },
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Balance(#[from] crate::balance::BalanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    Mlr,
    Lda,
    Qda,
    Knn,
    SvmLinear,
    SvmRbf,
    SvmPoly,
    RandomForest,
    /// Predicts the most frequent training class. Chance-level baseline.
    Majority,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlr => "MLR",
            ModelKind::Lda => "LDA",
            ModelKind::Qda => "QDA",
            ModelKind::Knn => "KNN",
            ModelKind::SvmLinear => "SVM_LINEAR",
            ModelKind::SvmRbf => "SVM_RBF",
            ModelKind::SvmPoly => "SVM_POLY",
            ModelKind::RandomForest => "RANDOM_FOREST",
            ModelKind::Majority => "MAJORITY",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters for every kind; each kind reads only its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// L2 penalty on MLR weights (intercepts excluded).
    pub l2_lambda: f64,
    pub knn_k: usize,
    /// When set, KNN picks k from this grid by stratified CV on the training data.
    pub knn_grid: Option<Vec<usize>>,
    pub svm_c: f64,
    /// RBF/polynomial scale; defaults to 1 / (p · mean column variance).
    pub gamma: Option<f64>,
    pub degree: u32,
    pub coef0: f64,
    pub svm_tol: f64,
    pub trees: usize,
    /// Candidate features per node; defaults to ⌊√p⌋.
    pub mtry: Option<usize>,
    pub min_split: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            knn_k: 5,
            knn_grid: None,
            svm_c: 1.0,
            gamma: None,
            degree: 3,
            coef0: 1.0,
            svm_tol: 1e-3,
            trees: 500,
            mtry: None,
            min_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hyper: Hyperparameters,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self { kind, seed, hyper: Hyperparameters::default() }
    }

    pub fn with_hyper(mut self, hyper: Hyperparameters) -> Self {
        self.hyper = hyper;
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let h = &self.hyper;
        let bad = |m: &str| Err(LearnError::InvalidHyperparameter(m.to_string()));
        match self.kind {
            ModelKind::Mlr if !(h.l2_lambda >= 0.0 && h.l2_lambda.is_finite()) => bad("l2_lambda must be ≥ 0"),
            ModelKind::Knn if h.knn_k == 0 => bad("knn_k must be ≥ 1"),
            ModelKind::Knn if h.knn_grid.as_ref().is_some_and(|g| g.is_empty() || g.contains(&0)) => {
                bad("knn_grid entries must be ≥ 1")
            }
            ModelKind::SvmLinear | ModelKind::SvmRbf | ModelKind::SvmPoly => {
                if !(h.svm_c > 0.0 && h.svm_c.is_finite()) {
                    bad("svm_c must be > 0")
                } else if h.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
                    bad("gamma must be > 0")
                } else if !(h.svm_tol > 0.0) {
                    bad("svm_tol must be > 0")
                } else if self.kind == ModelKind::SvmPoly && h.degree == 0 {
                    bad("degree must be ≥ 1")
                } else {
                    Ok(())
                }
            }
            ModelKind::RandomForest => {
                if h.trees == 0 {
                    bad("trees must be ≥ 1")
                } else if h.mtry == Some(0) {
                    bad("mtry must be ≥ 1")
                } else if h.min_split < 2 {
                    bad("min_split must be ≥ 2")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Per-class counts of labels in `0..n_classes`.
pub(crate) fn class_counts(y: &[usize], n_classes: usize) -> Vec<usize> {
    let mut c = vec![0; n_classes];
    for &v in y {
        c[v] += 1;
    }
    c
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax of log-scores, in place.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shape() {
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"RANDOM_FOREST","hyper":{"trees":50}}"#).unwrap();
        assert_eq!(s.kind, ModelKind::RandomForest);
        assert_eq!(s.hyper.trees, 50);
        assert_eq!(s.hyper.svm_c, 1.0);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"kind":"GBM"}"#).is_err());
    }

    #[test]
    fn validation_ranges() {
        let mut s = ModelSpec::new(ModelKind::SvmRbf, 0);
        s.hyper.svm_c = 0.0;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::new(ModelKind::RandomForest, 0);
        s.hyper.trees = 0;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::new(ModelKind::Knn, 0);
        s.hyper.knn_k = 0;
        assert!(s.validate().is_err());
        assert!(ModelSpec::new(ModelKind::Lda, 0).validate().is_ok());
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        let mut v = vec![1000.0, 1000.0];
        softmax_in_place(&mut v);
        assert_eq!(v, vec![0.5, 0.5]);
    }
}
