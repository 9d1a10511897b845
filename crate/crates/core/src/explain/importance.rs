use super::{ranks_desc, ExplainError};
use crate::learn::{Forest, Node, Tree};
use crate::matrix::{mean, sample_sd, Matrix};
use crate::rng::{rng_for, stream};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdaResult {
    /// Accuracy loss per repetition (rows) and feature (columns).
    pub per_repetition: Matrix,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    pub mda_mean: Vec<f64>,
    pub mda_sd: Vec<f64>,
    pub mdg: Vec<f64>,
    pub mda_rank: Vec<usize>,
    pub mdg_rank: Vec<usize>,
}

impl ImportanceReport {
    pub fn new(feature_names: Vec<String>, mda: &MdaResult, mdg: Vec<f64>) -> Self {
        Self {
            mda_rank: ranks_desc(&mda.mean),
            mdg_rank: ranks_desc(&mdg),
            feature_names,
            mda_mean: mda.mean.clone(),
            mda_sd: mda.sd.clone(),
            mdg,
        }
    }

    /// One row per feature.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ExplainError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature", "mda_mean", "mda_sd", "mdg", "mda_rank", "mdg_rank"])?;
        for j in 0..self.feature_names.len() {
            out.write_record([
                self.feature_names[j].clone(),
                self.mda_mean[j].to_string(),
                self.mda_sd[j].to_string(),
                self.mdg[j].to_string(),
                self.mda_rank[j].to_string(),
                self.mdg_rank[j].to_string(),
            ])?;
        }
        out.flush().map_err(|e| ExplainError::Csv(e.to_string()))
    }
}

fn tree_hits(tree: &Tree, x: &Matrix, rows: &[usize], y: &[usize]) -> usize {
    rows.iter().filter(|&&i| tree.predict(x.row(i)) == y[i]).count()
}

/// Loss in out-of-bag accuracy of one tree when each feature's OOB values
/// are shuffled among the OOB rows.
fn tree_losses(tree: &Tree, oob: &[usize], x: &Matrix, y: &[usize], rng: &mut crate::rng::Rng) -> Vec<f64> {
    let p = x.cols();
    let n = oob.len() as f64;
    let base = tree_hits(tree, x, oob, y);
    let mut local = x.select_rows(oob);
    let ly: Vec<usize> = oob.iter().map(|&i| y[i]).collect();
    let all: Vec<usize> = (0..oob.len()).collect();
    (0..p)
        .map(|j| {
            let original = local.column(j);
            let mut perm = original.clone();
            perm.shuffle(rng);
            for (i, v) in perm.iter().enumerate() {
                local.set(i, j, *v);
            }
            let hits = tree_hits(tree, &local, &all, &ly);
            for (i, v) in original.iter().enumerate() {
                local.set(i, j, *v);
            }
            (base as f64 - hits as f64) / n
        })
        .collect()
}

/// Mean decrease in accuracy. `x` and `y` must be the forest's training rows
/// in training order. Trees with an empty OOB set are skipped.
pub fn mda_importance(
    forest: &Forest,
    x: &Matrix,
    y: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<MdaResult, ExplainError> {
    if forest.oob.len() != forest.trees.len() {
        return Err(ExplainError::MissingOob);
    }
    if repetitions == 0 {
        return Err(ExplainError::ZeroRepetitions);
    }
    if x.cols() != forest.n_features {
        return Err(ExplainError::DimensionMismatch { expected: forest.n_features, got: x.cols() });
    }
    if x.rows() != y.len() {
        return Err(ExplainError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    if x.rows() != forest.n_train {
        return Err(ExplainError::TrainingRowsMismatch { expected: forest.n_train, got: x.rows() });
    }
    let p = x.cols();
    let t = forest.trees.len();
    let used: Vec<usize> = (0..t).filter(|&i| !forest.oob[i].is_empty()).collect();
    let losses: Vec<Vec<f64>> = (0..repetitions * used.len())
        .into_par_iter()
        .map(|u| {
            let (r, k) = (u / used.len(), used[u % used.len()]);
            let mut rng = rng_for(seed, stream::MDA, (r * t + k) as u64);
            tree_losses(&forest.trees[k], &forest.oob[k], x, y, &mut rng)
        })
        .collect();
    let mut per_repetition = Matrix::zeros(repetitions, p);
    if !used.is_empty() {
        for (r, chunk) in losses.chunks(used.len()).enumerate() {
            for j in 0..p {
                let v: Vec<f64> = chunk.iter().map(|l| l[j]).collect();
                per_repetition.set(r, j, mean(&v));
            }
        }
    }
    let mean_v = (0..p).map(|j| mean(&per_repetition.column(j))).collect();
    let sd = (0..p).map(|j| if repetitions > 1 { sample_sd(&per_repetition.column(j)) } else { 0.0 }).collect();
    Ok(MdaResult { per_repetition, mean: mean_v, sd })
}

/// Mean decrease in Gini: per tree, the sum over splits on each feature of
/// (node samples / root samples) × impurity decrease, averaged over trees.
pub fn mdg_importance(forest: &Forest) -> Vec<f64> {
    let mut total = vec![0.0; forest.n_features];
    for tree in &forest.trees {
        let root = tree.nodes[0].n_samples() as f64;
        for node in &tree.nodes {
            if let Node::Split { feature, n_samples, decrease, .. } = node {
                total[*feature] += *n_samples as f64 / root * decrease;
            }
        }
    }
    let m = forest.trees.len().max(1) as f64;
    total.iter_mut().for_each(|v| *v /= m);
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(feature: usize) -> Tree {
        Tree {
            nodes: vec![
                Node::Split { feature, threshold: 0.0, left: 1, right: 2, n_samples: 4, gini: 0.5, decrease: 0.5 },
                Node::Leaf { distribution: vec![1.0, 0.0], n_samples: 2 },
                Node::Leaf { distribution: vec![0.0, 1.0], n_samples: 2 },
            ],
            n_classes: 2,
        }
    }

    #[test]
    fn stump_puts_all_mdg_on_its_feature() {
        let f = Forest { trees: vec![stump(1)], oob: vec![vec![0]], n_features: 3, n_classes: 2, n_train: 4 };
        assert_eq!(mdg_importance(&f), vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn unused_and_constant_features_have_zero_mda() {
        let x = Matrix::from_rows(&[[-1.0, 5.0, 0.3], [1.0, 5.0, -0.2], [-2.0, 5.0, 0.9], [2.0, 5.0, 0.1]]);
        let y = [0, 1, 0, 1];
        let f = Forest {
            trees: vec![stump(0), stump(1)],
            oob: vec![vec![0, 1, 2, 3], vec![1, 2]],
            n_features: 3,
            n_classes: 2,
            n_train: 4,
        };
        let m = mda_importance(&f, &x, &y, 4, 9).unwrap();
        assert_eq!(m.mean[1], 0.0);
        assert_eq!(m.mean[2], 0.0);
        assert_eq!(m.sd[2], 0.0);
        assert!(m.mean[0] >= 0.0);
    }

    #[test]
    fn missing_oob_is_an_error() {
        let f = Forest { trees: vec![stump(0)], oob: vec![], n_features: 1, n_classes: 2, n_train: 2 };
        let x = Matrix::from_rows(&[[0.0], [1.0]]);
        assert_eq!(mda_importance(&f, &x, &[0, 1], 1, 0), Err(ExplainError::MissingOob));
    }

    #[test]
    fn ranks_are_a_permutation() {
        let r = ranks_desc(&[0.1, 0.5, 0.1, 0.0]);
        assert_eq!(r, vec![2, 1, 3, 4]);
    }
}
