//! Plain MLP with hand-derived reverse-mode gradients of the mean softmax
//! cross-entropy.

use crate::dfc::dynamics::{feedforward_pass, ForwardPass};
use crate::dfc::params::NetworkParams;
use crate::error::Result;
use crate::numerics::softmax::{accuracy, argmax_rows, cross_entropy};
use crate::numerics::{Activation, Matrix};

/// The baseline network is the same parameter block as the controlled
/// learner minus any recurrent machinery (which the feedforward pass ignores
/// anyway); initialization is shared so all methods start identically for a
/// given seed.
#[derive(Debug, Clone)]
pub struct BpNet {
    pub params: NetworkParams,
}

impl BpNet {
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        Ok(BpNet {
            params: NetworkParams::new(layer_sizes, activation, Activation::Linear, seed)?,
        })
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardPass> {
        feedforward_pass(&self.params, x)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(argmax_rows(self.forward(x)?.output()))
    }

    pub fn batch_accuracy(&self, x: &Matrix, labels: &[u8]) -> Result<f64> {
        Ok(accuracy(&self.predict(x)?, labels))
    }
}

/// Mean softmax cross-entropy of the network on a batch.
pub fn bp_loss(net: &BpNet, x: &Matrix, labels: &[u8]) -> Result<f64> {
    let fp = net.forward(x)?;
    Ok(cross_entropy(fp.output(), labels).0)
}

/// Exact gradients of the mean softmax cross-entropy with respect to every
/// weight layer, via the reverse-mode chain rule.
pub fn bp_grads(net: &BpNet, x: &Matrix, labels: &[u8]) -> Result<Vec<Matrix>> {
    let fp = net.forward(x)?;
    let num_layers = net.params.num_layers();
    let (_, mut delta) = cross_entropy(fp.output(), labels);
    // the readout is linear, so delta already sits at the last
    // pre-activation; walk backwards accumulating outer products
    let mut grads = vec![Matrix::zeros(0, 0); num_layers];
    for i in (0..num_layers).rev() {
        let below = if i == 0 { x } else { &fp.post[i - 1] };
        grads[i] = delta.matmul_tn(below)?;
        if i > 0 {
            let mut next = delta.matmul(&net.params.weights[i])?;
            let act = net.params.activation(i - 1);
            for (d, &v) in next.as_mut_slice().iter_mut().zip(fp.pre[i - 1].as_slice()) {
                *d *= act.derivative_scalar(v);
            }
            delta = next;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_net(seed: u64) -> BpNet {
        BpNet::new(&[4, 5, 3], Activation::Tanh, seed).unwrap()
    }

    fn toy_batch() -> (Matrix, Vec<u8>) {
        let x = Matrix::from_fn(6, 4, |i, j| (((i * 4 + j) as f64) * 0.7).sin());
        let y = vec![0, 1, 2, 0, 1, 2];
        (x, y)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = toy_net(3);
        let (x, y) = toy_batch();
        let grads = bp_grads(&net, &x, &y).unwrap();
        let eps = 1e-6;
        for layer in 0..net.params.num_layers() {
            for r in 0..net.params.weights[layer].rows() {
                for c in 0..net.params.weights[layer].cols() {
                    let mut plus = net.clone();
                    let v = plus.params.weights[layer].get(r, c);
                    plus.params.weights[layer].set(r, c, v + eps);
                    let mut minus = net.clone();
                    minus.params.weights[layer].set(r, c, v - eps);
                    let fd = (bp_loss(&plus, &x, &y).unwrap()
                        - bp_loss(&minus, &x, &y).unwrap())
                        / (2.0 * eps);
                    let g = grads[layer].get(r, c);
                    let denom = g.abs().max(1e-6);
                    assert!(
                        (fd - g).abs() / denom < 1e-5,
                        "layer {layer} ({r},{c}): fd {fd} vs {g}"
                    );
                }
            }
        }
    }

    #[test]
    fn relu_gradients_match_finite_differences() {
        let net = BpNet::new(&[4, 5, 3], Activation::Relu, 11).unwrap();
        let (x, y) = toy_batch();
        let grads = bp_grads(&net, &x, &y).unwrap();
        let eps = 1e-6;
        for layer in 0..2 {
            for r in 0..net.params.weights[layer].rows() {
                for c in 0..net.params.weights[layer].cols() {
                    let mut plus = net.clone();
                    let v = plus.params.weights[layer].get(r, c);
                    plus.params.weights[layer].set(r, c, v + eps);
                    let mut minus = net.clone();
                    minus.params.weights[layer].set(r, c, v - eps);
                    let fd = (bp_loss(&plus, &x, &y).unwrap()
                        - bp_loss(&minus, &x, &y).unwrap())
                        / (2.0 * eps);
                    let g = grads[layer].get(r, c);
                    assert!(
                        (fd - g).abs() / g.abs().max(1e-6) < 1e-4,
                        "layer {layer} ({r},{c}): fd {fd} vs {g}"
                    );
                }
            }
        }
    }

    #[test]
    fn duplicated_sample_matches_single() {
        let net = toy_net(9);
        let x1 = Matrix::from_fn(1, 4, |_, j| 0.3 * (j as f64) - 0.4);
        let x2 = Matrix::vstack(&[&x1, &x1]).unwrap();
        let g1 = bp_grads(&net, &x1, &[2]).unwrap();
        let g2 = bp_grads(&net, &x2, &[2, 2]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn saturated_softmax_gradient_vanishes() {
        let mut net = toy_net(1);
        let (x, _) = toy_batch();
        // scale the readout until every sample's logit margin is huge, so the
        // softmax saturates on the (by construction correct) argmax labels
        let fp = net.forward(&x).unwrap();
        let mut min_margin = f64::INFINITY;
        for b in 0..x.rows() {
            let mut row: Vec<f64> = fp.output().row(b).to_vec();
            row.sort_by(|a, b| b.partial_cmp(a).unwrap());
            min_margin = min_margin.min(row[0] - row[1]);
        }
        assert!(min_margin > 0.0);
        net.params.weights[1].scale(60.0 / min_margin);
        let preds = net.predict(&x).unwrap();
        let grads = bp_grads(&net, &x, &preds).unwrap();
        let norm: f64 = grads.iter().map(Matrix::frobenius_norm).sum();
        assert!(norm < 1e-6, "gradient norm {norm} should vanish when perfectly classified");
    }
}
