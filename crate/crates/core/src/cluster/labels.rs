use super::KMeansModel;
use crate::matrix::{mean, sample_sd, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster: usize,
    /// 1 is the highest risk.
    pub rank: usize,
    pub label: String,
    pub count: usize,
    pub mean_positive_rate: f64,
    pub sd_positive_rate: f64,
    pub mean_death_rate: f64,
    pub sd_death_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskLabeling {
    /// Indexed by cluster.
    pub rank_of_cluster: Vec<usize>,
    /// Sorted by rank.
    pub clusters: Vec<ClusterStats>,
}

impl RiskLabeling {
    pub fn k(&self) -> usize {
        self.rank_of_cluster.len()
    }

    /// Label names ordered by rank; class index `c` is rank `c + 1`.
    pub fn class_names(&self) -> Vec<String> {
        self.clusters.iter().map(|c| c.label.clone()).collect()
    }

    /// Zero-based class index (rank − 1) for each assignment.
    pub fn classes(&self, assignments: &[usize]) -> Vec<usize> {
        assignments.iter().map(|&a| self.rank_of_cluster[a] - 1).collect()
    }
}

pub fn label_name(rank: usize, k: usize) -> String {
    if k == 3 {
        ["High", "Medium", "Low"][rank - 1].to_string()
    } else {
        format!("Risk-{rank}")
    }
}

/// Ranks clusters by mean positive rate, descending (ties: mean death rate
/// descending, then lower cluster index). `rates` columns are (positive, death).
pub fn assign_risk_labels(model: &KMeansModel, rates: &Matrix) -> RiskLabeling {
    assert_eq!(model.assignments.len(), rates.rows(), "assignments must align with rates");
    let k = model.k;
    let mut pos = vec![Vec::new(); k];
    let mut death = vec![Vec::new(); k];
    for (i, &a) in model.assignments.iter().enumerate() {
        pos[a].push(rates.get(i, 0));
        death[a].push(rates.get(i, 1));
    }
    let safe_mean = |v: &[f64]| if v.is_empty() { 0.0 } else { mean(v) };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        safe_mean(&pos[b])
            .total_cmp(&safe_mean(&pos[a]))
            .then(safe_mean(&death[b]).total_cmp(&safe_mean(&death[a])))
            .then(a.cmp(&b))
    });
    let mut rank_of_cluster = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank_of_cluster[c] = r + 1;
    }
    let clusters = order
        .iter()
        .enumerate()
        .map(|(r, &c)| ClusterStats {
            cluster: c,
            rank: r + 1,
            label: label_name(r + 1, k),
            count: pos[c].len(),
            mean_positive_rate: safe_mean(&pos[c]),
            sd_positive_rate: sample_sd(&pos[c]),
            mean_death_rate: safe_mean(&death[c]),
            sd_death_rate: sample_sd(&death[c]),
        })
        .collect();
    RiskLabeling { rank_of_cluster, clusters }
}
