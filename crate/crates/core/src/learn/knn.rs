use crate::matrix::{sq_dist, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub k: usize,
    pub n_classes: usize,
}

impl KnnModel {
    /// The `k` nearest training rows, nearest first; distance ties go to the
    /// lower training index.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.x.iter_rows().map(|r| sq_dist(r, q)).zip(0..).collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority vote; among tied classes, the one holding the nearest neighbor.
    /// `out` receives the vote fractions.
    pub fn predict_row(&self, q: &[f64], out: &mut [f64]) -> usize {
        let nn = self.neighbors(q);
        let mut votes = vec![0usize; self.n_classes];
        for &i in &nn {
            votes[self.y[i]] += 1;
        }
        let top = votes.iter().copied().max().unwrap_or(0);
        for (o, &v) in out.iter_mut().zip(&votes) {
            *o = v as f64 / nn.len() as f64;
        }
        nn.iter().map(|&i| self.y[i]).find(|&c| votes[c] == top).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    #[test]
    fn one_nn_recovers_training_labels() {
        let mut rng = rng_for(1, 0, 0);
        let rows: Vec<[f64; 3]> = (0..50).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let y: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let m = KnnModel { x: Matrix::from_rows(&rows), y: y.clone(), k: 1, n_classes: 3 };
        let mut p = [0.0; 3];
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(m.predict_row(r, &mut p), y[i]);
        }
    }

    #[test]
    fn vote_tie_goes_to_nearest() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [-3.0], [4.0]]);
        let m = KnnModel { x, y: vec![1, 0, 0, 1], k: 4, n_classes: 2 };
        let mut p = [0.0; 2];
        assert_eq!(m.predict_row(&[0.0], &mut p), 1);
        assert_eq!(p, [0.5, 0.5]);
    }

    #[test]
    fn matches_brute_force_scan() {
        let mut rng = rng_for(2, 0, 0);
        for trial in 0..20 {
            let n = rng.gen_range(5..200);
            let k = rng.gen_range(1..10);
            let rows: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64]).collect();
            let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let m = KnnModel { x: Matrix::from_rows(&rows), y: y.clone(), k, n_classes: 3 };
            let q = [rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0)];
            // all-pairs scan with a full stable sort
            let mut all: Vec<(f64, usize)> =
                rows.iter().enumerate().map(|(i, r)| ((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2), i)).collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let nn: Vec<usize> = all.iter().take(k.min(n)).map(|&(_, i)| i).collect();
            let mut votes = [0; 3];
            nn.iter().for_each(|&i| votes[y[i]] += 1);
            let top = *votes.iter().max().unwrap();
            let expected = nn.iter().map(|&i| y[i]).find(|&c| votes[c] == top).unwrap();
            let mut p = [0.0; 3];
            assert_eq!(m.predict_row(&q, &mut p), expected, "trial {trial}");
        }
    }
}
