use super::{kmeans_fit, ClusterError, KMeansConfig};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub sse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowCurve {
    pub points: Vec<ElbowPoint>,
    pub chosen_k: usize,
    pub method: String,
    /// k values that were refit with more restarts to restore monotonicity.
    pub retried: Vec<usize>,
}

/// Fits k-means for every k in `k_min..=k_max` and picks the knee: the point
/// farthest from the chord joining the first and last points, with both axes
/// rescaled to [0, 1].
pub fn elbow_select_k(
    points: &Matrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<ElbowCurve, ClusterError> {
    if k_min == 0 || k_max < k_min {
        return Err(ClusterError::InvalidRange { k_min, k_max });
    }
    let mut curve = Vec::with_capacity(k_max - k_min + 1);
    let mut retried = Vec::new();
    for k in k_min..=k_max {
        let mut sse = kmeans_fit(points, k, seed, cfg)?.sse;
        if let Some(prev) = curve.last().map(|p: &ElbowPoint| p.sse) {
            if sse > prev {
                retried.push(k);
                let wide = KMeansConfig { restarts: cfg.restarts.max(1) * 4, ..*cfg };
                sse = sse.min(kmeans_fit(points, k, seed, &wide)?.sse);
            }
        }
        curve.push(ElbowPoint { k, sse });
    }
    let chosen_k = knee(&curve);
    Ok(ElbowCurve { points: curve, chosen_k, method: "max-chord-distance".into(), retried })
}

pub(crate) fn knee(curve: &[ElbowPoint]) -> usize {
    let first = curve[0];
    let last = curve[curve.len() - 1];
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.sse), hi.max(p.sse)));
    if curve.len() < 3 || hi <= lo {
        return first.k;
    }
    let span_k = (last.k - first.k) as f64;
    let norm = |p: &ElbowPoint| ((p.k - first.k) as f64 / span_k, (p.sse - lo) / (hi - lo));
    let (x0, y0) = norm(&first);
    let (x1, y1) = norm(&last);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len = (dx * dx + dy * dy).sqrt();
    let mut best = (first.k, -1.0);
    for p in curve {
        let (x, y) = norm(p);
        let dist = ((x - x0) * dy - (y - y0) * dx).abs() / len;
        if dist > best.1 {
            best = (p.k, dist);
        }
    }
    best.0
}
