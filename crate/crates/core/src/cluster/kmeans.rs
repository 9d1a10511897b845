use super::ClusterError;
use crate::matrix::{sq_dist, Matrix};
use crate::rng::{rng_for, stream};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative SSE change under which a restart is considered converged.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 10, max_iter: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub sse: f64,
    pub iterations: usize,
    pub seed: u64,
    pub restarts_used: usize,
    pub converged: bool,
    /// SSE after each Lloyd iteration of the winning restart.
    pub sse_history: Vec<f64>,
}

impl KMeansModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Lloyd's algorithm from k-means++ seeding, best of `cfg.restarts` runs.
///
/// Rows are processed in a canonical order (lexicographic on coordinates), so
/// permuting the input permutes the assignments and leaves centroids and SSE
/// untouched. Restart `r` draws from its own generator derived from
/// `(seed, r)`; the result does not depend on the rayon thread count.
pub fn kmeans_fit(points: &Matrix, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansModel, ClusterError> {
    let n = points.rows();
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > n {
        return Err(ClusterError::MoreClustersThanPoints { k, n });
    }
    if !points.is_finite() {
        return Err(ClusterError::NonFinite);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points
            .row(a)
            .iter()
            .zip(points.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sorted = points.select_rows(&order);

    let restarts = cfg.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| lloyd(&sorted, k, seed, r as u64, cfg))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.sse < a.sse { b } else { a })
        .expect("at least one restart");

    let mut assignments = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        assignments[orig] = best.assign[pos];
    }
    Ok(KMeansModel {
        k,
        centroids: best.centroids,
        assignments,
        sse: best.sse,
        iterations: best.iterations,
        seed,
        restarts_used: restarts,
        converged: best.converged,
        sse_history: best.history,
    })
}

struct Run {
    centroids: Matrix,
    assign: Vec<usize>,
    sse: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp(points: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(0, 0);
    centroids.push_row(points.row(rng.gen_range(0..n)));
    let mut d2: Vec<f64> = points.iter_rows().map(|x| sq_dist(x, centroids.row(0))).collect();
    while centroids.rows() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            // guard against running off the end through rounding
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push_row(points.row(pick));
        let c = centroids.row(centroids.rows() - 1).to_vec();
        for (i, x) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
    }
    centroids
}

fn assign_all(points: &Matrix, centroids: &Matrix, assign: &mut [usize]) {
    for (i, x) in points.iter_rows().enumerate() {
        assign[i] = nearest(x, centroids).0;
    }
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &Matrix, centroids: &Matrix, assign: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, x) in points.iter_rows().enumerate() {
            if sizes[assign[i]] < 2 {
                continue;
            }
            let d = sq_dist(x, centroids.row(assign[i]));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("n >= k guarantees a donor cluster");
        assign[i] = empty;
    }
}

/// Running means, so a cluster of identical points has that point as its centroid exactly.
fn update_centroids(points: &Matrix, assign: &[usize], k: usize) -> Matrix {
    let d = points.cols();
    let mut means = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, x) in points.iter_rows().enumerate() {
        let c = assign[i];
        counts[c] += 1;
        let cnt = counts[c] as f64;
        for (m, v) in means.row_mut(c).iter_mut().zip(x) {
            *m += (v - *m) / cnt;
        }
    }
    means
}

pub(crate) fn sse_of(points: &Matrix, centroids: &Matrix, assign: &[usize]) -> f64 {
    points.iter_rows().enumerate().map(|(i, x)| sq_dist(x, centroids.row(assign[i]))).sum()
}

fn lloyd(points: &Matrix, k: usize, seed: u64, restart: u64, cfg: &KMeansConfig) -> Run {
    let n = points.rows();
    let mut rng = rng_for(seed, stream::KMEANS, restart);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut assign = vec![0usize; n];
    assign_all(points, &centroids, &mut assign);
    repair_empty(points, &centroids, &mut assign, k);
    centroids = update_centroids(points, &assign, k);
    let mut sse = sse_of(points, &centroids, &assign);
    let mut history = vec![sse];
    let mut converged = false;
    let mut iterations = 1;
    let mut next = assign.clone();
    while iterations < cfg.max_iter {
        assign_all(points, &centroids, &mut next);
        repair_empty(points, &centroids, &mut next, k);
        if next == assign {
            converged = true;
            break;
        }
        std::mem::swap(&mut assign, &mut next);
        centroids = update_centroids(points, &assign, k);
        let new_sse = sse_of(points, &centroids, &assign);
        debug_assert!(
            new_sse <= sse * (1.0 + 1e-12) + 1e-300,
            "Lloyd step increased SSE: {sse} -> {new_sse}"
        );
        iterations += 1;
        history.push(new_sse);
        let rel = if sse > 0.0 { (sse - new_sse).abs() / sse } else { 0.0 };
        sse = new_sse;
        if rel < cfg.tol {
            // accept only if the partition is already a fixed point
            assign_all(points, &centroids, &mut next);
            if next == assign {
                converged = true;
                break;
            }
        }
    }
    Run { centroids, assign, sse, iterations, converged, history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(v)
    }

    #[test]
    fn single_cluster_is_mean() {
        let p = pts(&[[0.0, 0.0], [2.0, 0.0], [4.0, 6.0]]);
        let m = kmeans_fit(&p, 1, 3, &KMeansConfig::default()).unwrap();
        assert!((m.centroids.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((m.centroids.get(0, 1) - 2.0).abs() < 1e-15);
        // 4+4 + 0+4 + 4+16
        assert!((m.sse - 32.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_clusters() {
        let p = pts(&[[0.0, 0.0], [1.0, 1.0]]);
        let err = kmeans_fit(&p, 3, 0, &KMeansConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "more clusters than points (k = 3, n = 2)");
    }

    #[test]
    fn identical_points_leave_no_empty_cluster() {
        let p = pts(&[[1.0, 1.0]; 5]);
        let m = kmeans_fit(&p, 3, 9, &KMeansConfig::default()).unwrap();
        assert_eq!(m.sse, 0.0);
        assert!(m.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn two_blobs_match_enumeration() {
        let p = pts(&[[0.0, 0.0], [0.1, 0.2], [0.2, 0.0], [10.0, 10.0], [10.1, 9.8], [9.9, 10.2]]);
        let m = kmeans_fit(&p, 2, 1, &KMeansConfig::default()).unwrap();
        assert_eq!(m.assignments[0], m.assignments[1]);
        assert_eq!(m.assignments[1], m.assignments[2]);
        assert_eq!(m.assignments[3], m.assignments[4]);
        assert_ne!(m.assignments[0], m.assignments[3]);
        // brute force over all 2-partitions
        let n = 6;
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let assign: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let c = update_centroids(&p, &assign, 2);
            best = best.min(sse_of(&p, &c, &assign));
        }
        assert!((m.sse - best).abs() <= 1e-12 * best);
    }

    proptest! {
        #[test]
        fn lloyd_invariants(
            raw in prop::collection::vec((-5f64..5.0, -5f64..5.0), 4..40),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let p = Matrix::from_rows(&raw.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>());
            let m = kmeans_fit(&p, k, seed, &KMeansConfig { restarts: 3, ..Default::default() }).unwrap();
            prop_assert!(m.cluster_sizes().iter().all(|&s| s > 0));
            let recomputed = sse_of(&p, &m.centroids, &m.assignments);
            prop_assert!((recomputed - m.sse).abs() <= 1e-9 * m.sse.max(1e-300));
            for w in m.sse_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            if m.converged {
                for (i, x) in p.iter_rows().enumerate() {
                    prop_assert_eq!(nearest(x, &m.centroids).0, m.assignments[i]);
                }
            }
        }

        #[test]
        fn permutation_invariance(
            raw in prop::collection::vec((-5f64..5.0, -5f64..5.0), 4..30),
            k in 1usize..4,
            seed in any::<u64>(),
            shuffle_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let p = Matrix::from_rows(&raw.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>());
            let mut perm: Vec<usize> = (0..p.rows()).collect();
            perm.shuffle(&mut rng_for(shuffle_seed, 0, 0));
            let q = p.select_rows(&perm);
            let cfg = KMeansConfig { restarts: 3, ..Default::default() };
            let a = kmeans_fit(&p, k, seed, &cfg).unwrap();
            let b = kmeans_fit(&q, k, seed, &cfg).unwrap();
            prop_assert_eq!(&a.centroids, &b.centroids);
            prop_assert_eq!(a.sse, b.sse);
            for (pos, &orig) in perm.iter().enumerate() {
                prop_assert_eq!(b.assignments[pos], a.assignments[orig]);
            }
        }
    }
}
