use super::FeatureTable;
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub column: String,
    /// The partner in the pair that triggered the drop.
    pub reason_column: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationScreenResult {
    pub column_names: Vec<String>,
    pub corr: Matrix,
    pub kept: Vec<String>,
    pub dropped: Vec<DroppedColumn>,
}

impl CorrelationScreenResult {
    pub fn max_abs_off_diagonal(&self) -> f64 {
        max_abs_off_diagonal(&self.corr)
    }
}

pub(crate) fn max_abs_off_diagonal(corr: &Matrix) -> f64 {
    let p = corr.rows();
    let mut m: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                m = m.max(corr.get(i, j).abs());
            }
        }
    }
    m
}

/// Pearson correlation between every pair of columns.
pub fn correlation_matrix(table: &FeatureTable) -> Matrix {
    pearson(&table.values)
}

pub(crate) fn pearson(values: &Matrix) -> Matrix {
    let (n, p) = (values.rows(), values.cols());
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let col = values.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            col.into_iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut corr = Matrix::zeros(p, p);
    for i in 0..p {
        corr.set(i, i, 1.0);
        for j in i + 1..p {
            let s: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = (s / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            corr.set(i, j, r);
            corr.set(j, i, r);
        }
    }
    corr
}

/// Greedy collinearity screen. While some kept pair has |r| above the
/// threshold, the worst pair loses the member with the larger mean |r| to the
/// other kept columns; ties drop the alphabetically later name.
pub fn screen_collinear(corr: &Matrix, names: &[String], threshold: f64) -> CorrelationScreenResult {
    let p = corr.rows();
    assert_eq!(p, names.len(), "one name per correlation column");
    let mut alive = vec![true; p];
    let mut dropped = Vec::new();
    loop {
        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..p {
            for j in i + 1..p {
                if !(alive[i] && alive[j]) {
                    continue;
                }
                let r = corr.get(i, j);
                if r.abs() > threshold && worst.is_none_or(|(_, _, w)| r.abs() > w.abs()) {
                    worst = Some((i, j, r));
                }
            }
        }
        let Some((a, b, r)) = worst else { break };
        let mean_abs = |c: usize| {
            let others: Vec<f64> =
                (0..p).filter(|&k| k != c && alive[k]).map(|k| corr.get(c, k).abs()).collect();
            others.iter().sum::<f64>() / others.len() as f64
        };
        let (ma, mb) = (mean_abs(a), mean_abs(b));
        let drop_b = if ma != mb { mb > ma } else { names[b] > names[a] };
        let (gone, cause) = if drop_b { (b, a) } else { (a, b) };
        alive[gone] = false;
        dropped.push(DroppedColumn { column: names[gone].clone(), reason_column: names[cause].clone(), r });
    }
    CorrelationScreenResult {
        column_names: names.to_vec(),
        corr: corr.clone(),
        kept: (0..p).filter(|&i| alive[i]).map(|i| names[i].clone()).collect(),
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn affine_and_sign_flip() {
        let x = [1.0, 2.0, 4.0, 7.0, 11.0];
        let rows: Vec<[f64; 3]> = x.iter().map(|&v| [v, 2.0 * v + 1.0, -v]).collect();
        let c = pearson(&Matrix::from_rows(&rows));
        assert!((c.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((c.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(c.get(2, 2), 1.0);
    }

    #[test]
    fn nothing_above_threshold_keeps_all() {
        let c = Matrix::from_rows(&[[1.0, 0.5, -0.7], [0.5, 1.0, 0.2], [-0.7, 0.2, 1.0]]);
        let s = screen_collinear(&c, &names(&["a", "b", "c"]), 0.7);
        assert_eq!(s.kept, names(&["a", "b", "c"]));
        assert!(s.dropped.is_empty());
    }

    #[test]
    fn drops_member_with_larger_mean_correlation() {
        // A–B is the only offending pair; B is more correlated with C.
        let c = Matrix::from_rows(&[[1.0, 0.9, 0.1], [0.9, 1.0, 0.5], [0.1, 0.5, 1.0]]);
        let s = screen_collinear(&c, &names(&["A", "B", "C"]), 0.7);
        assert_eq!(s.kept, names(&["A", "C"]));
        assert_eq!(s.dropped, vec![DroppedColumn { column: "B".into(), reason_column: "A".into(), r: 0.9 }]);
    }

    #[test]
    fn tie_drops_alphabetically_later() {
        let c = Matrix::from_rows(&[[1.0, 0.8], [0.8, 1.0]]);
        let s = screen_collinear(&c, &names(&["zeta", "alpha"]), 0.7);
        assert_eq!(s.kept, names(&["alpha"]));
    }

    #[test]
    fn three_mutually_correlated_keep_one() {
        // Hand simulation: round 1 worst pair (0,1), both mean |r| = 0.95,
        // drop "y"; round 2 pair (0,2), mean |r| 0.95 each, drop "z"; stop.
        let c = Matrix::from_rows(&[[1.0, 0.95, 0.95], [0.95, 1.0, 0.95], [0.95, 0.95, 1.0]]);
        let s = screen_collinear(&c, &names(&["x", "y", "z"]), 0.7);
        assert_eq!(s.kept, names(&["x"]));
        assert_eq!(s.dropped.len(), 2);
        assert_eq!(s.dropped[0].column, "y");
        assert_eq!(s.dropped[1].column, "z");
    }

    proptest! {
        #[test]
        fn correlation_is_psd_and_screen_is_clean(
            rows in prop::collection::vec(prop::collection::vec(-10f64..10.0, 4), 5..30),
            threshold in 0.05f64..1.0,
        ) {
            let m = Matrix::from_rows(&rows);
            let c = pearson(&m);
            let p = c.cols();
            for i in 0..p {
                for j in 0..p {
                    prop_assert!(c.get(i, j).abs() <= 1.0);
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                }
            }
            let eig = DMatrix::from_row_slice(p, p, c.as_slice()).symmetric_eigen();
            prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-8));

            let nm = names(&["a", "b", "c", "d"]);
            let s = screen_collinear(&c, &nm, threshold);
            let idx: Vec<usize> = s.kept.iter().map(|k| nm.iter().position(|n| n == k).unwrap()).collect();
            for &i in &idx {
                for &j in &idx {
                    if i != j {
                        prop_assert!(c.get(i, j).abs() <= threshold);
                    }
                }
            }
            prop_assert_eq!(s.kept.len() + s.dropped.len(), 4);
        }
    }
}
