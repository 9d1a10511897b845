//! K-means on the outcome rates, Elbow-based choice of k, and ordering of
//! clusters into named risk levels.

mod elbow;
mod kmeans;
mod labels;

pub use elbow::{elbow_select_k, ElbowCurve, ElbowPoint};
pub use kmeans::{kmeans_fit, KMeansConfig, KMeansModel};
pub use labels::{assign_risk_labels, ClusterStats, RiskLabeling};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClusterError {
    #[error("more clusters than points (k = {k}, n = {n})")]
    MoreClustersThanPoints { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("points contain non-finite coordinates")]
    NonFinite,
    #[error("invalid k range {k_min}..={k_max}")]
    InvalidRange { k_min: usize, k_max: usize },
}
