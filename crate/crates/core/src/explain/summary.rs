use super::{order_desc, ExplainError, ShapMatrix};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSeries {
    pub feature: usize,
    pub class: usize,
    /// (raw feature value, attribution) for every row, in row order.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub feature_names: Vec<String>,
    /// `[class][feature]`
    pub mean_abs: Vec<Vec<f64>>,
    /// Per class, feature indices by descending mean |attribution|.
    pub ranking: Vec<Vec<usize>>,
    #[serde(skip)]
    pub dependence: Vec<DependenceSeries>,
}

impl ShapSummary {
    pub fn series(&self, feature: usize, class: usize) -> Option<&DependenceSeries> {
        self.dependence.iter().find(|s| s.feature == feature && s.class == class)
    }
}

/// Ranks features per class by mean |attribution| and collects the
/// dependence series. `raw` holds unstandardized feature values.
pub fn shap_summary(shap: &ShapMatrix, raw: &Matrix, feature_names: &[String]) -> Result<ShapSummary, ExplainError> {
    let (n, p, k) = (shap.n_rows, shap.n_features, shap.n_classes);
    if raw.cols() != p || feature_names.len() != p {
        return Err(ExplainError::DimensionMismatch { expected: p, got: raw.cols().min(feature_names.len()) });
    }
    if raw.rows() != n {
        return Err(ExplainError::LengthMismatch { rows: raw.rows(), labels: n });
    }
    let mut mean_abs = vec![vec![0.0; p]; k];
    for (c, per_class) in mean_abs.iter_mut().enumerate() {
        for (j, m) in per_class.iter_mut().enumerate() {
            // sorted summation so the result does not depend on row order
            let mut v: Vec<f64> = (0..n).map(|i| shap.get(i, j, c).abs()).collect();
            v.sort_by(f64::total_cmp);
            *m = if n == 0 { 0.0 } else { v.iter().sum::<f64>() / n as f64 };
        }
    }
    let ranking = mean_abs.iter().map(|m| order_desc(m)).collect();
    let mut dependence = Vec::with_capacity(p * k);
    for j in 0..p {
        for c in 0..k {
            let points = (0..n).map(|i| (raw.get(i, j), shap.get(i, j, c))).collect();
            dependence.push(DependenceSeries { feature: j, class: c, points });
        }
    }
    Ok(ShapSummary { feature_names: feature_names.to_vec(), mean_abs, ranking, dependence })
}

/// Long format, one line per (row, feature, class).
pub fn write_shap_long<W: Write>(
    w: W,
    shap: &ShapMatrix,
    raw: &Matrix,
    row_keys: &[String],
    feature_names: &[String],
    class_names: &[String],
) -> Result<(), ExplainError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row", "feature", "class", "value", "shap"])?;
    for i in 0..shap.n_rows {
        for j in 0..shap.n_features {
            for c in 0..shap.n_classes {
                out.write_record([
                    row_keys[i].as_str(),
                    feature_names[j].as_str(),
                    class_names[c].as_str(),
                    &raw.get(i, j).to_string(),
                    &shap.get(i, j, c).to_string(),
                ])?;
            }
        }
    }
    out.flush().map_err(|e| ExplainError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shap(values: Vec<f64>, n: usize, p: usize) -> ShapMatrix {
        ShapMatrix { n_rows: n, n_features: p, n_classes: 1, values, base_values: vec![0.0] }
    }

    #[test]
    fn zero_matrix_falls_back_to_feature_order() {
        let s = shap(vec![0.0; 6], 2, 3);
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let r = shap_summary(&s, &Matrix::zeros(2, 3), &names).unwrap();
        assert_eq!(r.ranking[0], vec![0, 1, 2]);
        assert_eq!(r.mean_abs[0], vec![0.0; 3]);
    }

    #[test]
    fn ranking_ignores_row_order() {
        let a = shap(vec![0.1, -0.5, 0.3, 0.2, -0.05, 0.4], 3, 2);
        let b = shap(vec![-0.05, 0.4, 0.1, -0.5, 0.3, 0.2], 3, 2);
        let names = vec!["x".to_string(), "y".to_string()];
        let ra = shap_summary(&a, &Matrix::zeros(3, 2), &names).unwrap();
        let rb = shap_summary(&b, &Matrix::zeros(3, 2), &names).unwrap();
        assert_eq!(ra.mean_abs, rb.mean_abs);
        assert_eq!(ra.ranking, vec![vec![1, 0]]);
        assert_eq!(ra.series(1, 0).unwrap().points.len(), 3);
    }
}
