use super::split::stratified_folds;
use super::{accuracy, fit_classifier, model::predict, CvReport, LearnError, ModelSpec};
use crate::balance::{smote_oversample, SmoteConfig};
use crate::matrix::Matrix;
use rayon::prelude::*;

/// Stratified k-fold cross-validation. With `smote`, each training fold is
/// oversampled on its own before fitting; the held-out fold never is.
pub fn kfold_cv(
    spec: &ModelSpec,
    x: &Matrix,
    y: &[usize],
    folds: usize,
    seed: u64,
    smote: Option<&SmoteConfig>,
) -> Result<CvReport, LearnError> {
    if x.rows() != y.len() {
        return Err(LearnError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    let fold_of = stratified_folds(y, folds, seed)?;
    let accs: Vec<f64> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold_of[i] != f);
            let mut xt = x.select_rows(&train);
            let mut yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            if let Some(cfg) = smote {
                let out = smote_oversample(&xt, &yt, cfg)?;
                xt = out.x;
                yt = out.y;
            }
            let model = fit_classifier(spec, &xt, &yt)?;
            let pred = predict(&model, &x.select_rows(&test))?;
            let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            Ok(accuracy(&pred.labels, &truth))
        })
        .collect::<Result<_, LearnError>>()?;
    Ok(CvReport::from_folds(accs))
}
