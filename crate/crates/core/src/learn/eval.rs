use super::LearnError;
use crate::matrix::{mean, sample_sd};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl CvReport {
    pub fn from_folds(fold_accuracies: Vec<f64>) -> Self {
        let m = mean(&fold_accuracies);
        let sd = sample_sd(&fold_accuracies);
        Self { fold_accuracies, mean: m, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Classes whose precision had a zero denominator (reported as 0).
    pub undefined_precision: Vec<usize>,
    /// Classes whose recall had a zero denominator (reported as 0).
    pub undefined_recall: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cv: Option<CvReport>,
    pub test: Option<TestReport>,
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

pub fn evaluate(predicted: &[usize], truth: &[usize]) -> Result<TestReport, LearnError> {
    if predicted.len() != truth.len() {
        return Err(LearnError::LengthMismatch { rows: predicted.len(), labels: truth.len() });
    }
    if truth.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let k = predicted.iter().chain(truth).max().map_or(0, |m| m + 1);
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    let mut precision = vec![0.0; k];
    let mut recall = vec![0.0; k];
    let mut undefined_precision = Vec::new();
    let mut undefined_recall = Vec::new();
    for c in 0..k {
        let col: usize = (0..k).map(|r| confusion[r][c]).sum();
        let row: usize = confusion[c].iter().sum();
        if col == 0 {
            undefined_precision.push(c);
        } else {
            precision[c] = confusion[c][c] as f64 / col as f64;
        }
        if row == 0 {
            undefined_recall.push(c);
        } else {
            recall[c] = confusion[c][c] as f64 / row as f64;
        }
    }
    Ok(TestReport {
        accuracy: trace as f64 / truth.len() as f64,
        confusion,
        precision,
        recall,
        undefined_precision,
        undefined_recall,
    })
}
