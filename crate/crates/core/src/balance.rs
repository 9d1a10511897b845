//! SMOTE oversampling: every minority class is grown to the majority size
//! with points interpolated between a sample and one of its nearest
//! same-class neighbors.

use crate::matrix::{sq_dist, Matrix};
use crate::rng::{rng_for, stream};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BalanceError {
    #[error("class too small for SMOTE: class {class} has {count} sample(s)")]
    ClassTooSmall { class: usize, count: usize },
    #[error("k_neighbors must be at least 1")]
    ZeroNeighbors,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self { k_neighbors: 5, seed: 0 }
    }
}

/// Where an output row came from; indices refer to the input rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "snake_case")]
pub enum Origin {
    Original { row: usize },
    Synthetic { base: usize, neighbor: usize },
}

impl Origin {
    /// Input rows that contributed to this output row.
    pub fn sources(&self) -> [usize; 2] {
        match *self {
            Origin::Original { row } => [row, row],
            Origin::Synthetic { base, neighbor } => [base, neighbor],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteOutput {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub synthetic_per_class: BTreeMap<usize, usize>,
    pub origins: Vec<Origin>,
}

/// Original rows come first, unchanged, followed by synthetic rows grouped by
/// class in ascending class order.
pub fn smote_oversample(x: &Matrix, y: &[usize], cfg: &SmoteConfig) -> Result<SmoteOutput, BalanceError> {
    if x.rows() != y.len() {
        return Err(BalanceError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    if cfg.k_neighbors == 0 {
        return Err(BalanceError::ZeroNeighbors);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        members.entry(c).or_default().push(i);
    }
    if let Some((&class, m)) = members.iter().find(|(_, m)| m.len() < 2) {
        return Err(BalanceError::ClassTooSmall { class, count: m.len() });
    }
    let majority = members.values().map(Vec::len).max().unwrap_or(0);

    let per_class: Vec<(usize, Vec<Vec<f64>>, Vec<Origin>)> = members
        .par_iter()
        .map(|(&class, idx)| {
            let (rows, origins) = synthesize(x, idx, majority - idx.len(), class, cfg);
            (class, rows, origins)
        })
        .collect();

    let mut out_x = x.clone();
    let mut out_y = y.to_vec();
    let mut origins: Vec<Origin> = (0..x.rows()).map(|row| Origin::Original { row }).collect();
    let mut synthetic_per_class = BTreeMap::new();
    for (class, rows, orig) in per_class {
        synthetic_per_class.insert(class, rows.len());
        for r in &rows {
            out_x.push_row(r);
            out_y.push(class);
        }
        origins.extend(orig);
    }
    Ok(SmoteOutput { x: out_x, y: out_y, synthetic_per_class, origins })
}

fn synthesize(
    x: &Matrix,
    idx: &[usize],
    need: usize,
    class: usize,
    cfg: &SmoteConfig,
) -> (Vec<Vec<f64>>, Vec<Origin>) {
    if need == 0 {
        return (Vec::new(), Vec::new());
    }
    let m = idx.len();
    let k = cfg.k_neighbors.min(m - 1);
    // k nearest same-class neighbors, brute force; ties by position
    let neighbors: Vec<Vec<usize>> = (0..m)
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..m)
                .filter(|&b| b != a)
                .map(|b| (sq_dist(x.row(idx[a]), x.row(idx[b])), b))
                .collect();
            d.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            d.truncate(k);
            d.into_iter().map(|(_, b)| b).collect()
        })
        .collect();

    let mut rng = rng_for(cfg.seed, stream::SMOTE, class as u64);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut rows = Vec::with_capacity(need);
    let mut origins = Vec::with_capacity(need);
    for s in 0..need {
        let a = order[s % m];
        let b = neighbors[a][rng.gen_range(0..k)];
        let u: f64 = rng.gen();
        let (xa, xb) = (x.row(idx[a]), x.row(idx[b]));
        rows.push(xa.iter().zip(xb).map(|(p, q)| p + u * (q - p)).collect());
        origins.push(Origin::Synthetic { base: idx[a], neighbor: idx[b] });
    }
    (rows, origins)
}
