//! L1-penalized binary logistic regression, fit by proximal gradient descent.
//!
//! Objective: mean logistic loss + `penalty * ||w||_1` (bias unpenalized).
//! The step size comes from a Lipschitz bound on the smooth part, with
//! backtracking halving as a safety net, so the objective is monotonically
//! non-increasing.

use super::activation::sigmoid;
use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

pub const L1_LOGISTIC_MAX_ITERS: usize = 10_000;
pub const L1_LOGISTIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: f64,
    pub iterations: usize,
}

impl LogisticModel {
    /// Decision rule: sign of `w . x + b` mapped to {0, 1}.
    pub fn predict(&self, x: &[f64]) -> u8 {
        if dot(&self.weights, x) + self.bias > 0.0 {
            1
        } else {
            0
        }
    }

    pub fn accuracy(&self, x: &Matrix, y: &[u8]) -> f64 {
        if x.rows() == 0 {
            return 0.0;
        }
        let hits = (0..x.rows()).filter(|&i| self.predict(x.row(i)) == y[i]).count();
        hits as f64 / x.rows() as f64
    }

    /// Unit normal of the separating hyperplane, if the weight vector is
    /// non-zero.
    pub fn unit_normal(&self) -> Option<Vec<f64>> {
        let norm = dot(&self.weights, &self.weights).sqrt();
        if norm == 0.0 {
            return None;
        }
        Some(self.weights.iter().map(|w| w / norm).collect())
    }
}

/// Mean logistic loss of (w, b) on (x, y); numerically stable softplus form.
fn smooth_loss(x: &Matrix, y: &[u8], w: &[f64], b: f64) -> f64 {
    let n = x.rows() as f64;
    let mut total = 0.0;
    for i in 0..x.rows() {
        let z = dot(w, x.row(i)) + b;
        // softplus(z) - y*z
        let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
        total += softplus - f64::from(y[i]) * z;
    }
    total / n
}

fn objective(x: &Matrix, y: &[u8], w: &[f64], b: f64, penalty: f64) -> f64 {
    smooth_loss(x, y, w, b) + penalty * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Fit the model by ISTA with a fixed step from the Lipschitz bound of the
/// mean logistic loss, plus backtracking. Converges when the largest
/// parameter change in one iteration falls below `L1_LOGISTIC_TOL`, or stops
/// after `L1_LOGISTIC_MAX_ITERS` iterations.
pub fn fit_l1_logistic(x: &Matrix, y: &[u8], penalty: f64) -> Result<LogisticModel> {
    fit_l1_logistic_traced(x, y, penalty).map(|(model, _)| model)
}

/// Same as [`fit_l1_logistic`] but also returns the objective value after
/// every iteration, which descent tests inspect.
pub fn fit_l1_logistic_traced(
    x: &Matrix,
    y: &[u8],
    penalty: f64,
) -> Result<(LogisticModel, Vec<f64>)> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "fit_l1_logistic: {} rows vs {} labels",
            x.rows(),
            y.len()
        )));
    }
    if penalty <= 0.0 {
        return Err(Error::InvalidArgument("fit_l1_logistic: penalty must be > 0".into()));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateFit(
            "fit_l1_logistic: need at least one sample of each class".into(),
        ));
    }

    let n = x.rows() as f64;
    let d = x.cols();
    // Lipschitz constant of the smooth part is at most ||X_aug||_2^2 / (4n),
    // bounded by the Frobenius norm; the bias contributes a ones column.
    let lipschitz = (x.as_slice().iter().map(|v| v * v).sum::<f64>() + n) / (4.0 * n);
    let base_step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);

    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut obj = objective(x, y, &w, b, penalty);
    let mut trace = vec![obj];
    let mut grad_w = vec![0.0f64; d];
    let mut iterations = 0;

    for iter in 0..L1_LOGISTIC_MAX_ITERS {
        iterations = iter + 1;
        // gradient of the smooth part
        grad_w.fill(0.0);
        let mut grad_b = 0.0;
        for i in 0..x.rows() {
            let row = x.row(i);
            let resid = sigmoid(dot(&w, row) + b) - f64::from(y[i]);
            for (g, &xi) in grad_w.iter_mut().zip(row) {
                *g += resid * xi;
            }
            grad_b += resid;
        }
        for g in &mut grad_w {
            *g /= n;
        }
        grad_b /= n;

        // proximal step with backtracking on the full objective
        let mut step = base_step;
        let (new_w, new_b, new_obj) = loop {
            let cand_w: Vec<f64> = w
                .iter()
                .zip(&grad_w)
                .map(|(&wi, &gi)| soft_threshold(wi - step * gi, step * penalty))
                .collect();
            let cand_b = b - step * grad_b;
            let cand_obj = objective(x, y, &cand_w, cand_b, penalty);
            if cand_obj <= obj || step < 1e-18 {
                break (cand_w, cand_b, cand_obj);
            }
            step *= 0.5;
        };

        let max_change = new_w
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold((new_b - b).abs(), f64::max);
        w = new_w;
        b = new_b;
        obj = new_obj;
        trace.push(obj);
        if max_change < L1_LOGISTIC_TOL {
            break;
        }
    }

    Ok((
        LogisticModel {
            weights: w,
            bias: b,
            penalty,
            iterations,
        },
        trace,
    ))
}
