//! Elastic Weight Consolidation: diagonal empirical Fisher accumulated at
//! task boundaries plus a quadratic pull toward the post-task snapshot.

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bp::BpNet;
use crate::error::{Error, Result};
use crate::numerics::softmax::softmax_rows;
use crate::numerics::Matrix;

pub const DEFAULT_FISHER_SAMPLES: usize = 2000;

#[derive(Debug, Clone)]
pub struct EwcState {
    /// Additively accumulated diagonal Fisher, one matrix per weight layer.
    pub fisher: Vec<Matrix>,
    /// Parameter snapshot from the latest consolidation.
    pub anchors: Vec<Matrix>,
    /// Regularization coefficient (the conventional factor of 2 from the
    /// quadratic's derivative is absorbed here).
    pub coeff: f64,
    pub consolidated_tasks: usize,
    pub fisher_samples: usize,
}

impl EwcState {
    pub fn new(net: &BpNet, coeff: f64) -> Self {
        let fisher = net.params.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
        let anchors = net.params.weights.clone();
        EwcState {
            fisher,
            anchors,
            coeff,
            consolidated_tasks: 0,
            fisher_samples: DEFAULT_FISHER_SAMPLES,
        }
    }

    /// Estimate the diagonal empirical Fisher on `n_samples` datapoints drawn
    /// from `task_inputs` (with labels sampled from the model's own softmax),
    /// add it to the running total, and snapshot the parameters. Call exactly
    /// once per task boundary.
    pub fn consolidate(
        &mut self,
        net: &BpNet,
        task_inputs: &Matrix,
        n_samples: usize,
        seed: u64,
    ) -> Result<()> {
        if n_samples == 0 {
            return Err(Error::InvalidArgument("fisher estimation needs n_samples > 0".into()));
        }
        if task_inputs.rows() == 0 {
            return Err(Error::InvalidArgument("fisher estimation needs task data".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row_dist = rand::distributions::Uniform::new(0, task_inputs.rows());
        let rows: Vec<usize> = (0..n_samples).map(|_| row_dist.sample(&mut rng)).collect();
        let x = task_inputs.select_rows(&rows);

        let fp = net.forward(&x)?;
        let probs = softmax_rows(fp.output());
        // per-sample label drawn from the model's own predictive distribution
        let mut delta = probs;
        for b in 0..delta.rows() {
            let u: f64 = rand::Rng::gen(&mut rng);
            let row = delta.row_mut(b);
            let mut cum = 0.0;
            let mut label = row.len() - 1;
            for (j, &p) in row.iter().enumerate() {
                cum += p;
                if u <= cum {
                    label = j;
                    break;
                }
            }
            row[label] -= 1.0;
        }

        // Per-sample weight gradients are rank-1 outer products, so the mean
        // of their squares factorizes into squared-delta^T @ squared-input.
        let num_layers = net.params.num_layers();
        for i in (0..num_layers).rev() {
            let below = if i == 0 { &x } else { &fp.post[i - 1] };
            let delta_sq = delta.map(|v| v * v);
            let below_sq = below.map(|v| v * v);
            let mut contrib = delta_sq.matmul_tn(&below_sq)?;
            contrib.scale(1.0 / n_samples as f64);
            self.fisher[i].add_assign(&contrib)?;
            if i > 0 {
                let mut next = delta.matmul(&net.params.weights[i])?;
                let act = net.params.activation(i - 1);
                for (d, &v) in next.as_mut_slice().iter_mut().zip(fp.pre[i - 1].as_slice()) {
                    *d *= act.derivative_scalar(v);
                }
                delta = next;
            }
        }

        self.anchors = net.params.weights.clone();
        self.consolidated_tasks += 1;
        Ok(())
    }

    /// Gradient of the quadratic penalty: `coeff * F .* (theta - anchor)`.
    pub fn penalty_grads(&self, net: &BpNet) -> Result<Vec<Matrix>> {
        let mut out = Vec::with_capacity(net.params.num_layers());
        for ((w, f), a) in net.params.weights.iter().zip(&self.fisher).zip(&self.anchors) {
            let mut g = w.sub(a)?;
            for (gv, &fv) in g.as_mut_slice().iter_mut().zip(f.as_slice()) {
                *gv *= self.coeff * fv;
            }
            out.push(g);
        }
        Ok(out)
    }

    /// The penalty itself, `coeff/2 * sum F (theta - anchor)^2`, consistent
    /// with [`EwcState::penalty_grads`].
    pub fn penalty_value(&self, net: &BpNet) -> Result<f64> {
        let mut total = 0.0;
        for ((w, f), a) in net.params.weights.iter().zip(&self.fisher).zip(&self.anchors) {
            for ((&wv, &fv), &av) in w.as_slice().iter().zip(f.as_slice()).zip(a.as_slice()) {
                total += fv * (wv - av) * (wv - av);
            }
        }
        Ok(0.5 * self.coeff * total)
    }

    /// Whether the penalty is active at all.
    pub fn active(&self) -> bool {
        self.coeff != 0.0 && self.consolidated_tasks > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Activation;

    fn toy() -> (BpNet, Matrix) {
        let net = BpNet::new(&[3, 4, 2], Activation::Relu, 5).unwrap();
        let x = Matrix::from_fn(32, 3, |i, j| (((i + 2 * j) as f64) * 0.37).sin().abs());
        (net, x)
    }

    #[test]
    fn fisher_nonnegative_and_additive() {
        let (net, x) = toy();
        let mut st = EwcState::new(&net, 200.0);
        st.consolidate(&net, &x, 200, 1).unwrap();
        let first: Vec<Matrix> = st.fisher.clone();
        assert!(first.iter().all(|f| f.as_slice().iter().all(|&v| v >= 0.0)));
        st.consolidate(&net, &x, 200, 1).unwrap();
        // identical second estimate doubles the accumulator
        for (f2, f1) in st.fisher.iter().zip(&first) {
            for (a, b) in f2.as_slice().iter().zip(f1.as_slice()) {
                assert!((a - 2.0 * b).abs() < 1e-12);
            }
        }
        assert_eq!(st.consolidated_tasks, 2);
    }

    #[test]
    fn penalty_zero_at_anchor() {
        let (net, x) = toy();
        let mut st = EwcState::new(&net, 200.0);
        st.consolidate(&net, &x, 100, 2).unwrap();
        let grads = st.penalty_grads(&net).unwrap();
        assert!(grads.iter().all(|g| g.max_abs() == 0.0));
        assert_eq!(st.penalty_value(&net).unwrap(), 0.0);
    }

    #[test]
    fn penalty_gradient_matches_finite_difference() {
        let (mut net, x) = toy();
        let mut st = EwcState::new(&net, 3.0);
        st.consolidate(&net, &x, 300, 3).unwrap();
        // move away from the anchor
        for w in &mut net.params.weights {
            w.map_inplace(|v| v + 0.05);
        }
        let grads = st.penalty_grads(&net).unwrap();
        let eps = 1e-6;
        for layer in 0..2 {
            for r in 0..net.params.weights[layer].rows() {
                for c in 0..net.params.weights[layer].cols() {
                    let mut plus = net.clone();
                    let v = plus.params.weights[layer].get(r, c);
                    plus.params.weights[layer].set(r, c, v + eps);
                    let mut minus = net.clone();
                    minus.params.weights[layer].set(r, c, v - eps);
                    let fd = (st.penalty_value(&plus).unwrap() - st.penalty_value(&minus).unwrap())
                        / (2.0 * eps);
                    let g = grads[layer].get(r, c);
                    assert!(
                        (fd - g).abs() <= 1e-6 * g.abs().max(1.0),
                        "({r},{c}): fd {fd} vs {g}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let (net, x) = toy();
        let mut st = EwcState::new(&net, 1.0);
        assert!(st.consolidate(&net, &x, 0, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (net, x) = toy();
        let mut a = EwcState::new(&net, 1.0);
        let mut b = EwcState::new(&net, 1.0);
        a.consolidate(&net, &x, 150, 9).unwrap();
        b.consolidate(&net, &x, 150, 9).unwrap();
        for (fa, fb) in a.fisher.iter().zip(&b.fisher) {
            assert_eq!(fa, fb);
        }
    }
}
