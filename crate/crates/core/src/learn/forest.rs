//! Random forest of fully grown Gini trees on bootstrap samples. Trees keep
//! per-node sample counts, impurities and impurity decreases, which the
//! importance and SHAP code consume.

use crate::matrix::Matrix;
use crate::rng::{rng_for, stream, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        gini: f64,
        /// gini − (n_left/n)·gini_left − (n_right/n)·gini_right
        decrease: f64,
    },
    Leaf {
        distribution: Vec<f64>,
        n_samples: usize,
    },
}

impl Node {
    pub fn n_samples(&self) -> usize {
        match self {
            Node::Split { n_samples, .. } | Node::Leaf { n_samples, .. } => *n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
    pub n_classes: usize,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { feature, threshold, left, right, .. } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return id,
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { distribution, .. } => distribution,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        super::argmax(self.predict_proba(x))
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, id: usize) -> usize {
            match &t.nodes[id] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Training rows left out of each tree's bootstrap, sorted.
    pub oob: Vec<Vec<usize>>,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_train: usize,
}

impl Forest {
    pub fn predict_proba_row(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.predict_proba(x)) {
                *o += p;
            }
        }
        let m = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= m);
    }
}

pub(crate) struct ForestParams {
    pub trees: usize,
    pub mtry: usize,
    pub min_split: usize,
    pub seed: u64,
}

pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, params: &ForestParams) -> Forest {
    let n = x.rows();
    let built: Vec<(Tree, Vec<usize>)> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(params.seed, stream::FOREST, t as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut drawn = vec![false; n];
            sample.iter().for_each(|&i| drawn[i] = true);
            let oob = (0..n).filter(|&i| !drawn[i]).collect();
            let tree = build_tree(x, y, n_classes, sample, params.mtry, params.min_split, &mut rng);
            (tree, oob)
        })
        .collect();
    let (trees, oob) = built.into_iter().unzip();
    Forest { trees, oob, n_features: x.cols(), n_classes, n_train: n }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / nf).powi(2)).sum::<f64>()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Best Gini split of `rows` on one feature over midpoints between sorted
/// distinct values. `buf` is scratch space.
fn best_on_feature(
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    feature: usize,
    parent_counts: &[usize],
    parent_gini: f64,
    buf: &mut Vec<(f64, usize)>,
) -> Option<BestSplit> {
    buf.clear();
    buf.extend(rows.iter().map(|&i| (x.get(i, feature), y[i])));
    buf.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = buf.len();
    let k = parent_counts.len();
    let mut left = vec![0usize; k];
    let mut best: Option<BestSplit> = None;
    for s in 0..n - 1 {
        left[buf[s].1] += 1;
        let (lo, hi) = (buf[s].0, buf[s + 1].0);
        if lo == hi {
            continue;
        }
        let nl = s + 1;
        let nr = n - nl;
        let right: Vec<usize> = parent_counts.iter().zip(&left).map(|(p, l)| p - l).collect();
        let decrease = parent_gini
            - (nl as f64 / n as f64) * gini(&left, nl)
            - (nr as f64 / n as f64) * gini(&right, nr);
        if best.as_ref().is_none_or(|b| decrease > b.decrease) {
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            best = Some(BestSplit { feature, threshold, decrease: decrease.max(0.0) });
        }
    }
    best
}

/// Grows one tree on `sample` (row indices, repeats allowed) until nodes are
/// pure or smaller than `min_split`. Nodes are numbered in depth-first order.
pub(crate) fn build_tree(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    sample: Vec<usize>,
    mtry: usize,
    min_split: usize,
    rng: &mut Rng,
) -> Tree {
    let p = x.cols();
    let mut nodes: Vec<Option<Node>> = Vec::new();
    let mut stack = vec![(0usize, sample)];
    nodes.push(None);
    let mut features: Vec<usize> = (0..p).collect();
    let mut buf = Vec::new();

    while let Some((id, rows)) = stack.pop() {
        let n = rows.len();
        let mut counts = vec![0usize; n_classes];
        rows.iter().for_each(|&i| counts[y[i]] += 1);
        let g = gini(&counts, n);
        let leaf = |counts: &[usize]| Node::Leaf {
            distribution: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            n_samples: n,
        };
        if n < min_split || counts.iter().filter(|&&c| c > 0).count() <= 1 {
            nodes[id] = Some(leaf(&counts));
            continue;
        }
        // draw mtry candidates; keep drawing while none of them can split
        features.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= mtry && best.is_some() {
                break;
            }
            if let Some(s) = best_on_feature(x, y, &rows, f, &counts, g, &mut buf) {
                if best.as_ref().is_none_or(|b| s.decrease > b.decrease) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            nodes[id] = Some(leaf(&counts));
            continue;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(None);
        nodes.push(None);
        nodes[id] = Some(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            n_samples: n,
            gini: g,
            decrease: split.decrease,
        });
        stack.push((right, r_rows));
        stack.push((left, l_rows));
    }
    Tree { nodes: nodes.into_iter().map(|n| n.expect("every node is filled")).collect(), n_classes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seed: u64, n: usize) -> (Matrix, Vec<usize>) {
        let mut rng = rng_for(seed, 0, 0);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let r = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            y.push(if r[0] + 0.3 * r[1] > 0.2 { 0 } else if r[2] > 0.0 { 1 } else { 2 });
            rows.push(r);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn leaves_partition_the_sample() {
        let (x, y) = data(1, 200);
        let mut rng = rng_for(3, 0, 0);
        let sample: Vec<usize> = (0..200).map(|_| rng.gen_range(0..200)).collect();
        let tree = build_tree(&x, &y, 3, sample.clone(), 1, 2, &mut rng);
        let mut hits = vec![0usize; tree.nodes.len()];
        for &i in &sample {
            hits[tree.leaf_index(x.row(i))] += 1;
        }
        for (id, node) in tree.nodes.iter().enumerate() {
            match node {
                Node::Leaf { distribution, n_samples } => {
                    assert_eq!(hits[id], *n_samples);
                    assert!((distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
                Node::Split { left, right, n_samples, decrease, .. } => {
                    assert_eq!(tree.nodes[*left].n_samples() + tree.nodes[*right].n_samples(), *n_samples);
                    assert!(*decrease >= 0.0);
                }
            }
        }
        // grown to purity: every bootstrap row is classified correctly
        for &i in &sample {
            assert_eq!(tree.predict(x.row(i)), y[i]);
        }
    }

    #[test]
    fn stump_routes_by_threshold() {
        let tree = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2, n_samples: 2, gini: 0.5, decrease: 0.5 },
                Node::Leaf { distribution: vec![1.0, 0.0, 0.0], n_samples: 1 },
                Node::Leaf { distribution: vec![0.0, 1.0, 0.0], n_samples: 1 },
            ],
            n_classes: 3,
        };
        assert_eq!(tree.predict(&[-1.0, 7.0]), 0);
        assert_eq!(tree.predict(&[1.0, 7.0]), 1);
    }

    #[test]
    fn forest_is_deterministic_across_thread_counts() {
        let (x, y) = data(2, 150);
        let params = ForestParams { trees: 20, mtry: 1, min_split: 2, seed: 77 };
        let a = fit(&x, &y, 3, &params);
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| fit(&x, &y, 3, &params));
        assert_eq!(a, b);
        assert!(a.oob.iter().all(|o| !o.is_empty()));
        let mut p = [0.0; 3];
        a.predict_proba_row(x.row(0), &mut p);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_rows_with_conflicting_labels_become_leaf() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]);
        let y = [0, 1, 1];
        let mut rng = rng_for(0, 0, 0);
        let t = build_tree(&x, &y, 2, vec![0, 1, 2], 1, 2, &mut rng);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_proba(&[1.0]), &[1.0 / 3.0, 2.0 / 3.0]);
    }
}
