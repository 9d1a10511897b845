//! Kernel SVMs trained one-vs-rest with an SMO solver that picks working
//! pairs by maximal violation with second-order gain.

use crate::matrix::{dot, sq_dist, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const TAU: f64 = 1e-12;
/// Above this many rows the Gram matrix is not materialized.
const FULL_GRAM_LIMIT: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Poly { gamma: f64, coef0: f64, degree: u32 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
            Kernel::Poly { gamma, coef0, degree } => (gamma * dot(a, b) + coef0).powi(degree as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// Rows of the training matrix with non-zero dual coefficient.
    pub support: Vec<usize>,
    pub support_vectors: Matrix,
    /// α_i · y_i for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    /// Explicit primal weights, linear kernel only.
    pub weights: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Final maximal KKT violation m(α) − M(α).
    pub kkt_gap: f64,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        if let Some(w) = &self.weights {
            return dot(w, x) + self.bias;
        }
        self.decision_by_kernel(kernel, x)
    }

    pub fn decision_by_kernel(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    /// One machine per class: that class against the rest.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn decision_values(&self, x: &[f64], out: &mut [f64]) {
        for (o, m) in out.iter_mut().zip(&self.machines) {
            *o = m.decision(&self.kernel, x);
        }
    }

    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }
}

/// Source of Gram matrix rows.
enum Gram<'a> {
    Full { n: usize, k: Vec<f64> },
    OnDemand { x: &'a Matrix, kernel: Kernel },
}

impl<'a> Gram<'a> {
    fn new(x: &'a Matrix, kernel: Kernel) -> Self {
        let n = x.rows();
        if n > FULL_GRAM_LIMIT {
            return Gram::OnDemand { x, kernel };
        }
        let k: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..n).map(move |j| kernel.eval(x.row(i), x.row(j))))
            .collect();
        Gram::Full { n, k }
    }

    fn row(&self, i: usize, buf: &mut Vec<f64>) {
        match self {
            Gram::Full { n, k } => {
                buf.clear();
                buf.extend_from_slice(&k[i * n..(i + 1) * n]);
            }
            Gram::OnDemand { x, kernel } => {
                buf.clear();
                buf.extend(x.iter_rows().map(|r| kernel.eval(x.row(i), r)));
            }
        }
    }

    fn diag(&self, i: usize) -> f64 {
        match self {
            Gram::Full { n, k } => k[i * n + i],
            Gram::OnDemand { x, kernel } => kernel.eval(x.row(i), x.row(i)),
        }
    }
}

pub(crate) struct SolveResult {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gap: f64,
}

/// Solves min ½αᵀQα − eᵀα s.t. 0 ≤ α ≤ C, yᵀα = 0 with Q_ij = y_i y_j K_ij.
fn solve(gram: &Gram, y: &[f64], c: f64, tol: f64, max_iter: usize) -> SolveResult {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let qd: Vec<f64> = (0..n).map(|i| gram.diag(i)).collect();
    let (mut ki, mut kj) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            gap = 0.0;
            break;
        }
        gram.row(i, &mut ki);
        // j: second-order choice in I_low; also track M(α)
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let b = gmax + v;
            if b > 0.0 {
                let mut a = qd[i] + qd[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        gap = gmax + gmax2;
        if gap < tol || j == usize::MAX {
            converged = true;
            break;
        }
        gram.row(j, &mut kj);
        iterations += 1;

        let (yi, yj) = (y[i], y[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = yi * yj * ki[j];
        if yi != yj {
            let mut quad = qd[i] + qd[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (yi * ki[t] * di + yj * kj[t] * dj);
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    SolveResult { alpha, bias: -rho, iterations, converged, gap }
}

/// Fits one binary machine per class. `max_iter` caps pair updates per machine.
pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, kernel: Kernel, c: f64, tol: f64) -> SvmModel {
    let gram = Gram::new(x, kernel);
    let max_iter = 100 * x.rows().max(100);
    let machines = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let yb: Vec<f64> = y.iter().map(|&v| if v == class { 1.0 } else { -1.0 }).collect();
            let r = solve(&gram, &yb, c, tol, max_iter);
            let support: Vec<usize> = (0..x.rows()).filter(|&i| r.alpha[i] > 0.0).collect();
            let dual_coef: Vec<f64> = support.iter().map(|&i| r.alpha[i] * yb[i]).collect();
            let support_vectors = x.select_rows(&support);
            let weights = matches!(kernel, Kernel::Linear).then(|| {
                let mut w = vec![0.0; x.cols()];
                for (sv, &a) in support_vectors.iter_rows().zip(&dual_coef) {
                    for (wj, v) in w.iter_mut().zip(sv) {
                        *wj += a * v;
                    }
                }
                w
            });
            BinarySvm {
                support,
                support_vectors,
                dual_coef,
                bias: r.bias,
                weights,
                iterations: r.iterations,
                converged: r.converged,
                kkt_gap: r.gap,
            }
        })
        .collect();
    SvmModel { kernel, c, machines }
}

/// Default scale: 1 / (p · mean column variance).
pub(crate) fn default_gamma(x: &Matrix) -> f64 {
    let p = x.cols();
    let var: f64 = (0..p).map(|j| crate::matrix::sample_sd(&x.column(j)).powi(2)).sum::<f64>() / p as f64;
    if var > 0.0 {
        1.0 / (p as f64 * var)
    } else {
        1.0 / p as f64
    }
}
