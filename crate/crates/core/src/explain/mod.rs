//! Attribution for fitted forests: out-of-bag permutation importance, Gini
//! importance and exact path-dependent TreeSHAP on the class-probability scale.

mod importance;
mod shap;
mod summary;

pub use importance::{mda_importance, mdg_importance, ImportanceReport, MdaResult};
pub use shap::{tree_shap, tree_shap_single, ShapMatrix};
pub use summary::{shap_summary, write_shap_long, DependenceSeries, ShapSummary};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExplainError {
    #[error("forest has no out-of-bag records; refit it with OOB tracking enabled")]
    MissingOob,
    #[error("tree {tree} node {node} has zero cover; the model is corrupt")]
    ZeroCover { tree: usize, node: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("forest was trained on {expected} rows, got {got}")]
    TrainingRowsMismatch { expected: usize, got: usize },
    #[error("repetitions must be ≥ 1")]
    ZeroRepetitions,
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for ExplainError {
    fn from(e: csv::Error) -> Self {
        ExplainError::Csv(e.to_string())
    }
}

/// 1-based ranks, highest score first; ties keep feature order.
pub(crate) fn ranks_desc(scores: &[f64]) -> Vec<usize> {
    let order = order_desc(scores);
    let mut ranks = vec![0; scores.len()];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = r + 1;
    }
    ranks
}

/// Feature indices sorted by descending score; ties keep feature order.
pub(crate) fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}
