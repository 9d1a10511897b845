//! Gaussian discriminant classifiers with a trace-scaled ridge on every
//! covariance estimate.

use super::{softmax_in_place, LearnError, ModelKind};
use crate::matrix::Matrix;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const RIDGE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub means: Matrix,
    /// Inverse of the ridged pooled covariance.
    pub precision: Matrix,
    pub log_priors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub means: Matrix,
    pub precisions: Vec<Matrix>,
    pub log_dets: Vec<f64>,
    pub log_priors: Vec<f64>,
}

fn class_means(x: &Matrix, y: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let p = x.cols();
    let mut means = Matrix::zeros(k, p);
    let mut counts = vec![0usize; k];
    for (i, r) in x.iter_rows().enumerate() {
        counts[y[i]] += 1;
        for (m, v) in means.row_mut(y[i]).iter_mut().zip(r) {
            *m += v;
        }
    }
    for c in 0..k {
        let n = counts[c] as f64;
        means.row_mut(c).iter_mut().for_each(|m| *m /= n);
    }
    (means, counts)
}

fn scatter(x: &Matrix, y: &[usize], means: &Matrix, class: Option<usize>) -> DMatrix<f64> {
    let p = x.cols();
    let mut s = DMatrix::<f64>::zeros(p, p);
    for (i, r) in x.iter_rows().enumerate() {
        if class.is_some_and(|c| c != y[i]) {
            continue;
        }
        let mu = means.row(y[i]);
        for a in 0..p {
            let da = r[a] - mu[a];
            for b in a..p {
                s[(a, b)] += da * (r[b] - mu[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            s[(a, b)] = s[(b, a)];
        }
    }
    s
}

/// Adds `ε · trace(Σ) / p` to the diagonal, then returns (Σ⁻¹, log det Σ).
fn ridged_inverse(mut cov: DMatrix<f64>, kind: ModelKind) -> Result<(Matrix, f64), LearnError> {
    let p = cov.nrows();
    let trace = cov.trace();
    let ridge = if trace > 0.0 { RIDGE_EPS * trace / p as f64 } else { RIDGE_EPS };
    for a in 0..p {
        cov[(a, a)] += ridge;
    }
    let chol = cov.cholesky().ok_or_else(|| LearnError::OptimizationFailed {
        kind,
        reason: "covariance is not positive definite".into(),
    })?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let inv = chol.inverse();
    if !log_det.is_finite() || inv.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::OptimizationFailed { kind, reason: "non-finite covariance inverse".into() });
    }
    // nalgebra is column-major; the inverse is symmetric so either order works
    Ok((Matrix::from_vec(p, p, inv.iter().copied().collect()), log_det))
}

fn log_priors(counts: &[usize], n: usize) -> Vec<f64> {
    counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect()
}

fn mahalanobis(x: &[f64], mu: &[f64], precision: &Matrix) -> f64 {
    let p = x.len();
    let d: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for a in 0..p {
        let row = precision.row(a);
        let mut s = 0.0;
        for b in 0..p {
            s += row[b] * d[b];
        }
        q += d[a] * s;
    }
    q
}

impl LdaModel {
    pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize) -> Result<Self, LearnError> {
        let n = x.rows();
        let (means, counts) = class_means(x, y, k);
        let dof = n.saturating_sub(k).max(1) as f64;
        let cov = scatter(x, y, &means, None) / dof;
        let (precision, _) = ridged_inverse(cov, ModelKind::Lda)?;
        Ok(Self { means, precision, log_priors: log_priors(&counts, n) })
    }

    pub fn predict_proba_row(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.log_priors[c] - 0.5 * mahalanobis(x, self.means.row(c), &self.precision);
        }
        softmax_in_place(out);
    }
}

impl QdaModel {
    pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize) -> Result<Self, LearnError> {
        let n = x.rows();
        let (means, counts) = class_means(x, y, k);
        let mut precisions = Vec::with_capacity(k);
        let mut log_dets = Vec::with_capacity(k);
        for (c, &count) in counts.iter().enumerate() {
            let cov = scatter(x, y, &means, Some(c)) / (count.saturating_sub(1).max(1) as f64);
            let (prec, ld) = ridged_inverse(cov, ModelKind::Qda)?;
            precisions.push(prec);
            log_dets.push(ld);
        }
        Ok(Self { means, precisions, log_dets, log_priors: log_priors(&counts, n) })
    }

    pub fn predict_proba_row(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.log_priors[c]
                - 0.5 * self.log_dets[c]
                - 0.5 * mahalanobis(x, self.means.row(c), &self.precisions[c]);
        }
        softmax_in_place(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    fn gaussian(rng: &mut impl Rng) -> f64 {
        // Box–Muller
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn lda_direction_matches_closed_form() {
        let mut rng = rng_for(21, 0, 0);
        let mu = [[0.0, 0.0, 0.0], [1.5, -0.5, 1.0]];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let c = i % 2;
            rows.push([0, 1, 2].map(|j| mu[c][j] + gaussian(&mut rng)));
            y.push(c);
        }
        let x = Matrix::from_rows(&rows);
        let m = LdaModel::fit(&x, &y, 2).unwrap();

        // closed form from direct estimates: Σ⁻¹ (μ₁ − μ₀)
        let n = [200.0, 200.0];
        let mut means = [[0.0; 3]; 2];
        for (r, &c) in rows.iter().zip(&y) {
            for j in 0..3 {
                means[c][j] += r[j] / n[c];
            }
        }
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        for (r, &c) in rows.iter().zip(&y) {
            for a in 0..3 {
                for b in 0..3 {
                    cov[(a, b)] += (r[a] - means[c][a]) * (r[b] - means[c][b]) / 398.0;
                }
            }
        }
        let diff = nalgebra::DVector::from_iterator(3, (0..3).map(|j| means[1][j] - means[0][j]));
        let expected = cov.try_inverse().unwrap() * diff;

        // fitted direction: gradient of the log-odds, by central differences
        let log_odds = |x: &[f64]| {
            let mut p = [0.0; 2];
            m.predict_proba_row(x, &mut p);
            (p[1] / p[0]).ln()
        };
        let h = 1e-4;
        let at = [0.3, -0.2, 0.4];
        let got: Vec<f64> = (0..3)
            .map(|j| {
                let mut a = at;
                let mut b = at;
                a[j] += h;
                b[j] -= h;
                (log_odds(&a) - log_odds(&b)) / (2.0 * h)
            })
            .collect();
        let dotp: f64 = got.iter().zip(expected.iter()).map(|(a, b)| a * b).sum();
        let na = got.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = expected.norm();
        let angle = (dotp / (na * nb)).clamp(-1.0, 1.0).acos();
        assert!(angle < 1e-3, "angle {angle}");
    }

    #[test]
    fn qda_matches_bayes_on_1d_toy() {
        let xs = [0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0];
        let y = [0, 0, 0, 1, 1, 1, 1];
        let x = Matrix::from_rows(&xs.iter().map(|&v| [v]).collect::<Vec<_>>());
        let m = QdaModel::fit(&x, &y, 2).unwrap();
        // hand-evaluated: class 0 mean 1, var 1; class 1 mean 7, var 20/3
        let ridge = |v: f64| v + 1e-6 * v;
        let (v0, v1) = (ridge(1.0), ridge(20.0 / 3.0));
        let dens = |x: f64, mu: f64, v: f64| (-(x - mu).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        for q in [-1.0, 2.5, 3.7, 9.0] {
            let a = 3.0 / 7.0 * dens(q, 1.0, v0);
            let b = 4.0 / 7.0 * dens(q, 7.0, v1);
            let mut p = [0.0; 2];
            m.predict_proba_row(&[q], &mut p);
            assert!((p[0] - a / (a + b)).abs() < 1e-12, "q={q}");
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qda_reduces_to_lda_with_equal_covariances() {
        let mut rng = rng_for(4, 0, 0);
        let base: Vec<[f64; 2]> = (0..30).map(|_| [gaussian(&mut rng), gaussian(&mut rng) * 0.5]).collect();
        let shifts = [[0.0, 0.0], [2.0, 1.0], [-1.0, 3.0]];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (c, s) in shifts.iter().enumerate() {
            for b in &base {
                rows.push([b[0] + s[0], b[1] + s[1]]);
                y.push(c);
            }
        }
        let x = Matrix::from_rows(&rows);
        let lda = LdaModel::fit(&x, &y, 3).unwrap();
        let qda = QdaModel::fit(&x, &y, 3).unwrap();
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        for r in x.iter_rows() {
            lda.predict_proba_row(r, &mut a);
            qda.predict_proba_row(r, &mut b);
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn singular_covariance_is_ridged() {
        // second feature is a copy of the first
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, i as f64]).collect();
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let m = LdaModel::fit(&Matrix::from_rows(&rows), &y, 2).unwrap();
        assert!(m.precision.is_finite());
    }
}
