use super::ExplainError;
use crate::learn::{Forest, Node, Tree};
use crate::matrix::Matrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Attributions on the class-probability scale. `values` is laid out
/// row-major as `[row][feature][class]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub values: Vec<f64>,
    /// Cover-weighted mean forest output per class.
    pub base_values: Vec<f64>,
}

impl ShapMatrix {
    pub fn get(&self, row: usize, feature: usize, class: usize) -> f64 {
        self.values[(row * self.n_features + feature) * self.n_classes + class]
    }

    /// Attributions of one row, `[feature][class]`.
    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.n_features * self.n_classes;
        &self.values[row * w..(row + 1) * w]
    }

    /// base + Σ attributions for one row and class.
    pub fn reconstruct(&self, row: usize, class: usize) -> f64 {
        self.base_values[class] + (0..self.n_features).map(|j| self.get(row, j, class)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut [PathElem], len: usize, zero: f64, one: f64, feature: Option<usize>) {
    path[len] = PathElem { feature, zero, one, weight: if len == 0 { 1.0 } else { 0.0 } };
    let l = len as f64;
    for i in (0..len).rev() {
        path[i + 1].weight += one * path[i].weight * (i as f64 + 1.0) / (l + 1.0);
        path[i].weight = zero * path[i].weight * (l - i as f64) / (l + 1.0);
    }
}

/// Removes element `idx` from a path of `len` elements (last index `len - 1`).
fn unwind(path: &mut [PathElem], len: usize, idx: usize) {
    let depth = len - 1;
    let d = depth as f64;
    let PathElem { zero, one, .. } = path[idx];
    let mut next = path[depth].weight;
    for j in (0..depth).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = next * (d + 1.0) / ((j as f64 + 1.0) * one);
            next = t - path[j].weight * zero * (d - j as f64) / (d + 1.0);
        } else {
            path[j].weight = path[j].weight * (d + 1.0) / (zero * (d - j as f64));
        }
    }
    for j in idx..depth {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
}

/// Total weight of the path after unwinding element `idx`, without mutating it.
fn unwound_sum(path: &[PathElem], len: usize, idx: usize) -> f64 {
    let depth = len - 1;
    let d = depth as f64;
    let PathElem { zero, one, .. } = path[idx];
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for j in (0..depth).rev() {
        if one != 0.0 {
            let t = next * (d + 1.0) / ((j as f64 + 1.0) * one);
            total += t;
            next = path[j].weight - t * zero * (d - j as f64) / (d + 1.0);
        } else if zero != 0.0 {
            total += path[j].weight / zero * (d + 1.0) / (d - j as f64);
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a Tree,
    tree_id: usize,
    x: &'a [f64],
    k: usize,
    phi: &'a mut [f64],
    buf: Vec<PathElem>,
}

impl Walker<'_> {
    /// `start` is where this level's copy of the parent path begins; the
    /// parent path has `len` elements.
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        node: usize,
        start: usize,
        len: usize,
        zero: f64,
        one: f64,
        feature: Option<usize>,
    ) -> Result<(), ExplainError> {
        // copy the parent path into a fresh segment so siblings see it unchanged
        let here = start + len;
        self.buf.copy_within(start..start + len, here);
        let path = &mut self.buf[here..];
        extend(path, len, zero, one, feature);
        let mut len = len + 1;
        match &self.tree.nodes[node] {
            Node::Leaf { distribution, .. } => {
                for i in 1..len {
                    let w = unwound_sum(path, len, i);
                    let e = path[i];
                    let f = e.feature.expect("only the root element has no feature");
                    let scale = w * (e.one - e.zero);
                    for (c, v) in distribution.iter().enumerate() {
                        self.phi[f * self.k + c] += scale * v;
                    }
                }
                Ok(())
            }
            Node::Split { feature: split, threshold, left, right, n_samples, .. } => {
                if *n_samples == 0 {
                    return Err(ExplainError::ZeroCover { tree: self.tree_id, node });
                }
                let (hot, cold) = if self.x[*split] <= *threshold { (*left, *right) } else { (*right, *left) };
                let cover = *n_samples as f64;
                let hot_cover = self.tree.nodes[hot].n_samples() as f64;
                let cold_cover = self.tree.nodes[cold].n_samples() as f64;
                let (mut iz, mut io) = (1.0, 1.0);
                if let Some(k) = (1..len).find(|&k| path[k].feature == Some(*split)) {
                    iz = path[k].zero;
                    io = path[k].one;
                    unwind(path, len, k);
                    len -= 1;
                }
                self.recurse(hot, here, len, iz * hot_cover / cover, io, Some(*split))?;
                self.recurse(cold, here, len, iz * cold_cover / cover, 0.0, Some(*split))
            }
        }
    }
}

fn tree_depth_bound(tree: &Tree) -> usize {
    tree.depth() + 2
}

/// Cover-weighted expected output of one tree, per class.
fn tree_expectation(tree: &Tree, tree_id: usize) -> Result<Vec<f64>, ExplainError> {
    let mut out = vec![0.0; tree.n_classes];
    let root = tree.nodes[0].n_samples();
    if root == 0 {
        return Err(ExplainError::ZeroCover { tree: tree_id, node: 0 });
    }
    for node in &tree.nodes {
        if let Node::Leaf { distribution, n_samples } = node {
            let w = *n_samples as f64 / root as f64;
            for (o, v) in out.iter_mut().zip(distribution) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

fn shap_into(tree: &Tree, tree_id: usize, x: &[f64], phi: &mut [f64], buf: Vec<PathElem>) -> Result<Vec<PathElem>, ExplainError> {
    let mut w = Walker { tree, tree_id, x, k: tree.n_classes, phi, buf };
    w.recurse(0, 0, 0, 1.0, 1.0, None)?;
    Ok(w.buf)
}

fn path_buffer(tree: &Tree) -> Vec<PathElem> {
    let d = tree_depth_bound(tree);
    vec![PathElem::default(); d * (d + 1) / 2 + d]
}

/// Exact path-dependent Shapley values of one tree for one row:
/// `(base values, attributions [feature][class])`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], n_features: usize) -> Result<(Vec<f64>, Vec<f64>), ExplainError> {
    let base = tree_expectation(tree, 0)?;
    let mut phi = vec![0.0; n_features * tree.n_classes];
    shap_into(tree, 0, x, &mut phi, path_buffer(tree))?;
    Ok((base, phi))
}

/// Forest attributions for every row of `x`: the mean over trees of each
/// tree's exact Shapley values, per class.
pub fn tree_shap(forest: &Forest, x: &Matrix) -> Result<ShapMatrix, ExplainError> {
    let p = forest.n_features;
    let k = forest.n_classes;
    if x.cols() != p {
        return Err(ExplainError::DimensionMismatch { expected: p, got: x.cols() });
    }
    let m = forest.trees.len() as f64;
    let mut base_values = vec![0.0; k];
    for (t, tree) in forest.trees.iter().enumerate() {
        for (b, v) in base_values.iter_mut().zip(tree_expectation(tree, t)?) {
            *b += v;
        }
    }
    base_values.iter_mut().for_each(|b| *b /= m);
    let max_buf = forest.trees.iter().map(|t| path_buffer(t).len()).max().unwrap_or(0);
    let rows: Vec<Vec<f64>> = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let mut phi = vec![0.0; p * k];
            let mut buf = vec![PathElem::default(); max_buf];
            for (t, tree) in forest.trees.iter().enumerate() {
                buf = shap_into(tree, t, x.row(i), &mut phi, buf)?;
            }
            phi.iter_mut().for_each(|v| *v /= m);
            Ok(phi)
        })
        .collect::<Result<_, ExplainError>>()?;
    Ok(ShapMatrix { n_rows: x.rows(), n_features: p, n_classes: k, values: rows.concat(), base_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    /// Conditional expectation of a tree given the features in `subset`:
    /// follow `x` on known features, cover-weight both children otherwise.
    fn cond_exp(tree: &Tree, node: usize, x: &[f64], subset: u32, out: &mut [f64], w: f64) {
        match &tree.nodes[node] {
            Node::Leaf { distribution, .. } => {
                for (o, v) in out.iter_mut().zip(distribution) {
                    *o += w * v;
                }
            }
            Node::Split { feature, threshold, left, right, n_samples, .. } => {
                if subset >> feature & 1 == 1 {
                    let next = if x[*feature] <= *threshold { *left } else { *right };
                    cond_exp(tree, next, x, subset, out, w);
                } else {
                    for c in [*left, *right] {
                        let f = tree.nodes[c].n_samples() as f64 / *n_samples as f64;
                        cond_exp(tree, c, x, subset, out, w * f);
                    }
                }
            }
        }
    }

    /// Shapley values by enumerating every feature subset.
    fn brute_force(tree: &Tree, x: &[f64], p: usize) -> Vec<f64> {
        let k = tree.n_classes;
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let v = |s: u32| {
            let mut o = vec![0.0; k];
            cond_exp(tree, 0, x, s, &mut o, 1.0);
            o
        };
        let mut phi = vec![0.0; p * k];
        for j in 0..p {
            for s in 0u32..(1 << p) {
                if s >> j & 1 == 1 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let weight = fact(size) * fact(p - size - 1) / fact(p);
                let (with, without) = (v(s | 1 << j), v(s));
                for c in 0..k {
                    phi[j * k + c] += weight * (with[c] - without[c]);
                }
            }
        }
        phi
    }

    fn random_tree(seed: u64, p: usize, n: usize) -> (Tree, Matrix) {
        let mut rng = rng_for(seed, 0, 0);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + r[1 % p] * r[0] > 0.1) + usize::from(r[p - 1] > 0.5)).collect();
        let x = Matrix::from_rows(&rows);
        let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let tree = crate::learn::forest::build_tree(&x, &y, 3, sample, p, 2, &mut rng);
        (tree, x)
    }

    #[test]
    fn matches_subset_enumeration() {
        for seed in 0..20 {
            let p = 2 + (seed as usize % 4);
            let (tree, x) = random_tree(seed, p, 40);
            for i in 0..x.rows() {
                let (_, phi) = tree_shap_single(&tree, x.row(i), p).unwrap();
                let bf = brute_force(&tree, x.row(i), p);
                for (a, b) in phi.iter().zip(&bf) {
                    assert!((a - b).abs() < 1e-9, "seed {seed} row {i}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn local_accuracy_on_forest() {
        let mut rng = rng_for(5, 0, 0);
        let rows: Vec<[f64; 4]> = (0..120).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let y: Vec<usize> = rows.iter().map(|r| if r[0] > 0.3 { 0 } else if r[1] + r[3] > 0.0 { 1 } else { 2 }).collect();
        let x = Matrix::from_rows(&rows);
        let mut spec = crate::learn::ModelSpec::new(crate::learn::ModelKind::RandomForest, 3);
        spec.hyper.trees = 30;
        let m = crate::learn::fit_classifier(&spec, &x, &y).unwrap();
        let f = m.forest().unwrap();
        let s = tree_shap(f, &x).unwrap();
        let mut pr = [0.0; 3];
        for i in 0..x.rows() {
            f.predict_proba_row(x.row(i), &mut pr);
            for c in 0..3 {
                assert!((s.reconstruct(i, c) - pr[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_leaf_gives_zero_attribution() {
        let t = Tree { nodes: vec![Node::Leaf { distribution: vec![0.25, 0.75], n_samples: 4 }], n_classes: 2 };
        let (base, phi) = tree_shap_single(&t, &[1.0, 2.0], 2).unwrap();
        assert_eq!(base, vec![0.25, 0.75]);
        assert!(phi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_feature_splits_attribution_equally() {
        let stump = |feature| Tree {
            nodes: vec![
                Node::Split { feature, threshold: 0.0, left: 1, right: 2, n_samples: 10, gini: 0.48, decrease: 0.3 },
                Node::Leaf { distribution: vec![0.9, 0.1], n_samples: 4 },
                Node::Leaf { distribution: vec![0.2, 0.8], n_samples: 6 },
            ],
            n_classes: 2,
        };
        let forest = Forest { trees: vec![stump(0), stump(1)], oob: vec![vec![], vec![]], n_features: 3, n_classes: 2, n_train: 10 };
        let x = Matrix::from_rows(&[[-0.5, -0.5, 3.0], [0.7, 0.7, -1.0]]);
        let s = tree_shap(&forest, &x).unwrap();
        for i in 0..2 {
            for c in 0..2 {
                assert!((s.get(i, 0, c) - s.get(i, 1, c)).abs() < 1e-9);
                assert_eq!(s.get(i, 2, c), 0.0);
            }
        }
    }

    #[test]
    fn zero_cover_is_an_error() {
        let t = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2, n_samples: 0, gini: 0.0, decrease: 0.0 },
                Node::Leaf { distribution: vec![1.0], n_samples: 0 },
                Node::Leaf { distribution: vec![1.0], n_samples: 0 },
            ],
            n_classes: 1,
        };
        assert!(matches!(tree_shap_single(&t, &[0.0], 1), Err(ExplainError::ZeroCover { .. })));
    }
}
