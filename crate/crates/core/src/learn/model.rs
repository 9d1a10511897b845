use super::discriminant::{LdaModel, QdaModel};
use super::forest::{self, Forest, ForestParams};
use super::knn::KnnModel;
use super::mlr::{self, MlrModel};
use super::svm::{self, Kernel, SvmModel};
use super::{argmax, class_counts, kfold_cv, LearnError, ModelKind, ModelSpec};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

pub const MODEL_SCHEMA: &str = "risklab.model/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FittedParams {
    Mlr(MlrModel),
    Lda(LdaModel),
    Qda(QdaModel),
    Knn(KnnModel),
    Svm(SvmModel),
    RandomForest(Forest),
    Majority { class: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema: String,
    pub kind: ModelKind,
    pub n_features: usize,
    pub n_classes: usize,
    /// Training rows per class, in class-index order.
    pub class_counts: Vec<usize>,
    pub params: FittedParams,
    /// Non-fatal fitting problems such as an SVM subproblem hitting its iteration cap.
    pub warnings: Vec<String>,
}

impl TrainedModel {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn forest(&self) -> Option<&Forest> {
        match &self.params {
            FittedParams::RandomForest(f) => Some(f),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// Row-wise class probabilities; `None` for SVMs.
    pub probabilities: Option<Matrix>,
}

const KNN_GRID_FOLDS: usize = 5;

fn choose_knn_k(spec: &ModelSpec, grid: &[usize], x: &Matrix, y: &[usize]) -> Result<usize, LearnError> {
    let min_count = class_counts(y, y.iter().max().map_or(0, |m| m + 1))
        .into_iter()
        .filter(|&c| c > 0)
        .min()
        .unwrap_or(0);
    let folds = KNN_GRID_FOLDS.min(min_count);
    if folds < 2 {
        return Ok(spec.hyper.knn_k);
    }
    let mut best = (f64::NEG_INFINITY, spec.hyper.knn_k);
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    for k in grid {
        let mut s = spec.clone();
        s.hyper.knn_grid = None;
        s.hyper.knn_k = k;
        let cv = kfold_cv(&s, x, y, folds, spec.seed, None)?;
        if cv.mean > best.0 {
            best = (cv.mean, k);
        }
    }
    Ok(best.1)
}

/// Fits `spec` on standardized `x` with labels `y` in `0..K`, where K is one
/// more than the largest label. Every class in `0..K` must be present.
pub fn fit_classifier(spec: &ModelSpec, x: &Matrix, y: &[usize]) -> Result<TrainedModel, LearnError> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(LearnError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    if y.is_empty() || x.cols() == 0 {
        return Err(LearnError::EmptyInput);
    }
    let k = y.iter().max().map_or(0, |m| m + 1);
    let counts = class_counts(y, k);
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(LearnError::EmptyClass(c));
    }
    if k < 2 {
        return Err(LearnError::TooFewClasses(k));
    }
    if !x.is_finite() {
        return Err(LearnError::OptimizationFailed { kind: spec.kind, reason: "non-finite input".into() });
    }
    let h = &spec.hyper;
    let mut warnings = Vec::new();
    let gamma = || h.gamma.unwrap_or_else(|| svm::default_gamma(x));
    let params = match spec.kind {
        ModelKind::Mlr => FittedParams::Mlr(mlr::fit(x, y, k, h.l2_lambda)?),
        ModelKind::Lda => FittedParams::Lda(LdaModel::fit(x, y, k)?),
        ModelKind::Qda => FittedParams::Qda(QdaModel::fit(x, y, k)?),
        ModelKind::Knn => {
            let kk = match &h.knn_grid {
                Some(grid) => choose_knn_k(spec, grid, x, y)?,
                None => h.knn_k,
            };
            FittedParams::Knn(KnnModel { x: x.clone(), y: y.to_vec(), k: kk, n_classes: k })
        }
        ModelKind::SvmLinear | ModelKind::SvmRbf | ModelKind::SvmPoly => {
            let kernel = match spec.kind {
                ModelKind::SvmLinear => Kernel::Linear,
                ModelKind::SvmRbf => Kernel::Rbf { gamma: gamma() },
                _ => Kernel::Poly { gamma: gamma(), coef0: h.coef0, degree: h.degree },
            };
            let m = svm::fit(x, y, k, kernel, h.svm_c, h.svm_tol);
            for (c, b) in m.machines.iter().enumerate() {
                if !b.converged {
                    warnings.push(format!(
                        "SMO for class {c} stopped at the iteration cap ({} updates, KKT gap {:.3e})",
                        b.iterations, b.kkt_gap
                    ));
                }
            }
            FittedParams::Svm(m)
        }
        ModelKind::RandomForest => {
            let p = x.cols();
            let mtry = h.mtry.unwrap_or(((p as f64).sqrt().floor() as usize).max(1)).min(p);
            let params = ForestParams { trees: h.trees, mtry, min_split: h.min_split, seed: spec.seed };
            FittedParams::RandomForest(forest::fit(x, y, k, &params))
        }
        ModelKind::Majority => FittedParams::Majority { class: argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>()) },
    };
    Ok(TrainedModel {
        schema: MODEL_SCHEMA.to_string(),
        kind: spec.kind,
        n_features: x.cols(),
        n_classes: k,
        class_counts: counts,
        params,
        warnings,
    })
}

pub fn predict(model: &TrainedModel, x: &Matrix) -> Result<Prediction, LearnError> {
    if x.cols() != model.n_features {
        return Err(LearnError::DimensionMismatch { expected: model.n_features, got: x.cols() });
    }
    let k = model.n_classes;
    let mut labels = Vec::with_capacity(x.rows());
    let mut proba = Matrix::zeros(x.rows(), k);
    let mut buf = vec![0.0; k];
    for (i, row) in x.iter_rows().enumerate() {
        let label = match &model.params {
            FittedParams::Mlr(m) => {
                m.predict_proba_row(row, &mut buf);
                argmax(&buf)
            }
            FittedParams::Lda(m) => {
                m.predict_proba_row(row, &mut buf);
                argmax(&buf)
            }
            FittedParams::Qda(m) => {
                m.predict_proba_row(row, &mut buf);
                argmax(&buf)
            }
            FittedParams::Knn(m) => m.predict_row(row, &mut buf),
            FittedParams::Svm(m) => {
                m.decision_values(row, &mut buf);
                argmax(&buf)
            }
            FittedParams::RandomForest(f) => {
                f.predict_proba_row(row, &mut buf);
                argmax(&buf)
            }
            FittedParams::Majority { class } => {
                buf.iter_mut().enumerate().for_each(|(c, b)| *b = if c == *class { 1.0 } else { 0.0 });
                *class
            }
        };
        labels.push(label);
        proba.row_mut(i).copy_from_slice(&buf);
    }
    let probabilities = (!matches!(model.params, FittedParams::Svm(_))).then_some(proba);
    Ok(Prediction { labels, probabilities })
}
