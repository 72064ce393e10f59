//! Softmax cross-entropy pieces shared by the controller target and the
//! backprop baselines.

use super::matrix::Matrix;

/// Row-wise softmax with max-shift for stability.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy and its gradient w.r.t. the logits,
/// `(softmax - onehot) / batch`.
pub fn cross_entropy(logits: &Matrix, labels: &[u8]) -> (f64, Matrix) {
    let n = logits.rows() as f64;
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for i in 0..grad.rows() {
        let y = labels[i] as usize;
        let row = grad.row_mut(i);
        loss -= row[y].max(1e-300).ln();
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    (loss / n, grad)
}

/// Per-row softmax minus one-hot, without the 1/batch factor.
pub fn error_signal(output: &Matrix, labels: &[u8]) -> Matrix {
    let mut e = softmax_rows(output);
    for i in 0..e.rows() {
        let y = labels[i] as usize;
        *e.row_mut(i).get_mut(y).unwrap() -= 1.0;
    }
    e
}

pub fn argmax_rows(m: &Matrix) -> Vec<u8> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best as u8
        })
        .collect()
}

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}
