//! Multinomial logistic regression fit by full-batch gradient descent on the
//! penalized mean negative log-likelihood with backtracking line search.

use super::{softmax_in_place, LearnError, ModelKind};
use crate::matrix::{dot, Matrix};
use serde::{Deserialize, Serialize};

const MAX_ITER: usize = 500;
const REL_TOL: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrModel {
    /// K × (p + 1); the last column holds the intercepts.
    pub weights: Matrix,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting at W = 0.
    pub nll_history: Vec<f64>,
}

fn scores(w: &Matrix, x: &[f64], out: &mut [f64]) {
    let p = x.len();
    for (k, s) in out.iter_mut().enumerate() {
        let row = w.row(k);
        *s = dot(&row[..p], x) + row[p];
    }
}

/// Mean negative log-likelihood plus `lambda · ‖W‖²` over non-intercept
/// weights, and its gradient with respect to `w`.
pub fn mlr_objective(w: &Matrix, x: &Matrix, y: &[usize], lambda: f64) -> (f64, Matrix) {
    let (n, p) = (x.rows(), x.cols());
    let k = w.rows();
    let mut grad = Matrix::zeros(k, p + 1);
    let mut s = vec![0.0; k];
    let mut nll = 0.0;
    for (i, xi) in x.iter_rows().enumerate() {
        scores(w, xi, &mut s);
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        nll += lse - s[y[i]];
        softmax_in_place(&mut s);
        s[y[i]] -= 1.0;
        for (c, &r) in s.iter().enumerate() {
            let g = grad.row_mut(c);
            for (gj, xj) in g[..p].iter_mut().zip(xi) {
                *gj += r * xj;
            }
            g[p] += r;
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut penalty = 0.0;
    for c in 0..k {
        let wr = w.row(c).to_vec();
        let g = grad.row_mut(c);
        for j in 0..=p {
            g[j] *= inv_n;
            if j < p {
                g[j] += 2.0 * lambda * wr[j];
                penalty += wr[j] * wr[j];
            }
        }
    }
    (nll * inv_n + lambda * penalty, grad)
}

pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, lambda: f64) -> Result<MlrModel, LearnError> {
    let p = x.cols();
    let mut w = Matrix::zeros(n_classes, p + 1);
    let (mut f, mut g) = mlr_objective(&w, x, y, lambda);
    let mut history = vec![f];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let fail = |reason: &str| LearnError::OptimizationFailed { kind: ModelKind::Mlr, reason: reason.into() };
    if !f.is_finite() {
        return Err(fail("non-finite loss"));
    }
    while iterations < MAX_ITER {
        iterations += 1;
        let g2: f64 = g.as_slice().iter().map(|v| v * v).sum();
        if g2 == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial = Matrix::from_vec(
                w.rows(),
                w.cols(),
                w.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a - step * b).collect(),
            );
            let (ft, gt) = mlr_objective(&trial, x, y, lambda);
            if ft.is_finite() && ft <= f - ARMIJO * step * g2 {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            // no descent possible at machine precision
            converged = true;
            break;
        };
        let rel = (f - ft).abs() / f.abs().max(f64::MIN_POSITIVE);
        w = trial;
        f = ft;
        g = gt;
        history.push(f);
        step = (step * 2.0).min(1e3);
        if rel < REL_TOL {
            converged = true;
            break;
        }
    }
    if !f.is_finite() {
        return Err(fail("non-finite loss"));
    }
    Ok(MlrModel { weights: w, lambda, iterations, converged, nll_history: history })
}

impl MlrModel {
    pub fn predict_proba_row(&self, x: &[f64], out: &mut [f64]) {
        scores(&self.weights, x, out);
        softmax_in_place(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    fn toy() -> (Matrix, Vec<usize>) {
        let mut rng = rng_for(5, 0, 0);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let c = i % 3;
            rows.push([c as f64 + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0) - c as f64 * 0.5]);
            y.push(c);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, y) = toy();
        let mut rng = rng_for(9, 0, 0);
        let h = 1e-5;
        for _ in 0..5 {
            let w = Matrix::from_vec(3, 3, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let (_, g) = mlr_objective(&w, &x, &y, 0.01);
            let mut num = vec![0.0; 9];
            for (j, nj) in num.iter_mut().enumerate() {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp.set(j / 3, j % 3, w.get(j / 3, j % 3) + h);
                wm.set(j / 3, j % 3, w.get(j / 3, j % 3) - h);
                *nj = (mlr_objective(&wp, &x, &y, 0.01).0 - mlr_objective(&wm, &x, &y, 0.01).0) / (2.0 * h);
            }
            let diff: f64 = num.iter().zip(g.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm <= 1e-4, "relative error {}", diff / norm);
        }
    }

    #[test]
    fn objective_decreases_monotonically() {
        let (x, y) = toy();
        let m = fit(&x, &y, 3, 1e-4).unwrap();
        assert!(m.nll_history.len() > 2);
        for w in m.nll_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let mut prob = vec![0.0; 3];
        let mut hits = 0;
        for (i, r) in x.iter_rows().enumerate() {
            m.predict_proba_row(r, &mut prob);
            assert!((prob.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            hits += usize::from(super::super::argmax(&prob) == y[i]);
        }
        assert!(hits > 40);
    }

    #[test]
    fn intercepts_are_not_penalized() {
        let w = Matrix::from_rows(&[[0.0, 5.0], [0.0, -5.0]]);
        let x = Matrix::from_rows(&[[0.0], [0.0]]);
        let (f0, g) = mlr_objective(&w, &x, &[0, 1], 10.0);
        let (f1, _) = mlr_objective(&w, &x, &[0, 1], 0.0);
        assert_eq!(f0, f1);
        assert_eq!(g.get(0, 0), 0.0);
    }
}
