//! Adam optimizer state and update step.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates for one parameter matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Matrix,
    v: Matrix,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Advance the moments with `grad` and return the bias-corrected update
    /// term `lr * m_hat / (sqrt(v_hat) + eps)`; the caller subtracts it from
    /// the parameters. Splitting the step this way lets training code apply
    /// the update selectively (row freezing) without touching the moments.
    pub fn update_term(&mut self, grad: &Matrix, lr: f64) -> Result<Matrix> {
        if grad.shape() != self.m.shape() {
            return Err(Error::ShapeMismatch(format!(
                "adam: grad {}x{} vs state {}x{}",
                grad.rows(),
                grad.cols(),
                self.m.rows(),
                self.m.cols()
            )));
        }
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        let mut out = Matrix::zeros(grad.rows(), grad.cols());
        let (m, v) = (self.m.as_mut_slice(), self.v.as_mut_slice());
        for (i, (&g, o)) in grad.as_slice().iter().zip(out.as_mut_slice()).enumerate() {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = m[i] / b1t;
            let v_hat = v[i] / b2t;
            *o = lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(out)
    }
}

/// One bias-corrected Adam update: returns the new parameters and state,
/// leaving the inputs untouched.
pub fn adam_step(
    state: &AdamState,
    params: &Matrix,
    grad: &Matrix,
    lr: f64,
) -> Result<(Matrix, AdamState)> {
    if params.shape() != grad.shape() {
        return Err(Error::ShapeMismatch(format!(
            "adam: params {}x{} vs grad {}x{}",
            params.rows(),
            params.cols(),
            grad.rows(),
            grad.cols()
        )));
    }
    let mut next_state = state.clone();
    let term = next_state.update_term(grad, lr)?;
    let mut next = params.clone();
    next.sub_assign(&term)?;
    Ok((next, next_state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let state = AdamState::new(2, 3);
        let params = Matrix::from_fn(2, 3, |i, j| (i + j) as f64);
        let grad = Matrix::zeros(2, 3);
        let (next, st) = adam_step(&state, &params, &grad, 0.01).unwrap();
        assert_eq!(next, params);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_magnitude_close_to_lr() {
        // with bias correction, m_hat/sqrt(v_hat) == sign(g) on the first step
        let state = AdamState::new(1, 4);
        let params = Matrix::zeros(1, 4);
        let grad = Matrix::from_rows(&[vec![3.0, -0.2, 11.0, -4.5]]).unwrap();
        let lr = 0.05;
        let (next, _) = adam_step(&state, &params, &grad, lr).unwrap();
        for (p, g) in next.row(0).iter().zip(grad.row(0)) {
            let expected = -lr * g.signum();
            assert!((p - expected).abs() < lr * 1e-6, "got {p}, expected {expected}");
        }
    }

    #[test]
    fn pure_function_of_state() {
        let state = AdamState::new(2, 2);
        let params = Matrix::from_fn(2, 2, |i, j| 0.3 * (i as f64) - 0.1 * (j as f64));
        let grad = Matrix::from_fn(2, 2, |i, j| (i * 2 + j) as f64 - 1.5);
        let (a, sa) = adam_step(&state, &params, &grad, 0.01).unwrap();
        let (b, sb) = adam_step(&state, &params, &grad, 0.01).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.step_count(), sb.step_count());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let state = AdamState::new(2, 2);
        let params = Matrix::zeros(2, 2);
        let grad = Matrix::zeros(2, 3);
        assert!(adam_step(&state, &params, &grad, 0.01).is_err());
    }

    #[test]
    fn step_counter_increments() {
        let mut state = AdamState::new(1, 1);
        let grad = Matrix::from_rows(&[vec![1.0]]).unwrap();
        for expected in 1..=5 {
            state.update_term(&grad, 0.1).unwrap();
            assert_eq!(state.step_count(), expected);
        }
    }
}
