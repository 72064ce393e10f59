//! Local weight updates computed from the settled state, and the trainer
//! that applies them.
//!
//! Forward weights move each neuron's feedforward activation toward its
//! settled target, for active neurons only; recurrent weights learn which
//! neurons get suppressed. Both updates are centered to zero mean over the
//! entries they touch so no sub-population drifts toward higher excitability
//! and dominates the winner-take-all selection.

use crate::data::Paradigm;
use crate::dfc::config::{DfcConfig, RecurrentUpdateMode};
use crate::dfc::dynamics::{
    compute_feedback_weights, feedforward_pass, output_target, simulate_dynamics, ConvergedState,
};
use crate::dfc::params::NetworkParams;
use crate::error::Result;
use crate::numerics::matrix::axpy;
use crate::numerics::softmax::{accuracy, argmax_rows};
use crate::numerics::{AdamState, Matrix};

/// A centered update for one parameter matrix plus the rows it may touch.
/// Rows outside `updated_rows` must stay bit-identical, so they are never
/// written to.
#[derive(Debug, Clone)]
pub struct LayerUpdate {
    pub delta: Matrix,
    pub updated_rows: Vec<bool>,
}

/// Forward-weight updates: batch-averaged outer products of the
/// target-vs-feedforward difference with the presynaptic settled activity,
/// rows of suppressed neurons zeroed, then mean-centered over the surviving
/// entries.
pub fn forward_weight_update(
    cs: &ConvergedState,
    x: &Matrix,
    per_row_centering: bool,
) -> Result<Vec<LayerUpdate>> {
    let batch = cs.batch_size() as f64;
    let mut updates = Vec::with_capacity(cs.num_layers());
    for i in 0..cs.num_layers() {
        let mut err = cs.targets[i].sub(&cs.ff_activations[i])?;
        // no learning for neurons inactive in a given sample; the output
        // layer's mask freezes rows the same way without ever masking
        // activity
        for b in 0..err.rows() {
            let mask_row = cs.suppressed[i].row(b);
            for (e, &dead) in err.row_mut(b).iter_mut().zip(mask_row) {
                if dead {
                    *e = 0.0;
                }
            }
        }
        let below = if i == 0 { x } else { &cs.targets[i - 1] };
        let mut delta = err.matmul_tn(below)?;
        delta.scale(1.0 / batch);

        // a neuron's row updates if it was active in at least one sample
        let mut updated_rows = cs.suppressed[i].all_per_col();
        for r in updated_rows.iter_mut() {
            *r = !*r;
        }
        center_rows(&mut delta, &updated_rows, None, per_row_centering);
        updates.push(LayerUpdate { delta, updated_rows });
    }
    Ok(updates)
}

/// Recurrent-weight updates for hidden layers. In `SuppressedOnly` mode the
/// incoming rows of suppressed neurons receive the Hebbian-style
/// anti-correlation update between their would-be feedforward magnitude and
/// the settled activity; in `AllNeurons` mode every row uses the general
/// magnitude-difference rule. Diagonals stay zero.
pub fn recurrent_weight_update(
    cs: &ConvergedState,
    mode: RecurrentUpdateMode,
    num_hidden: usize,
    per_row_centering: bool,
) -> Result<Vec<LayerUpdate>> {
    let batch = cs.batch_size() as f64;
    let mut updates = Vec::with_capacity(num_hidden);
    for i in 0..num_hidden {
        let n = cs.targets[i].cols();
        let (mut factor, updated_rows) = match mode {
            RecurrentUpdateMode::Off => (Matrix::zeros(cs.targets[i].rows(), n), vec![false; n]),
            RecurrentUpdateMode::SuppressedOnly => {
                // -|phi(v_ff)| on suppressed rows, 0 elsewhere
                let mut f = Matrix::zeros(cs.targets[i].rows(), n);
                for b in 0..f.rows() {
                    let mask_row = cs.suppressed[i].row(b);
                    let ff_row = cs.ff_activations[i].row(b);
                    for (j, v) in f.row_mut(b).iter_mut().enumerate() {
                        if mask_row[j] {
                            *v = -ff_row[j].abs();
                        }
                    }
                }
                (f, cs.suppressed[i].any_per_col())
            }
            RecurrentUpdateMode::AllNeurons => {
                // |r_ss| - |phi(v_ff)| everywhere
                let mut f = Matrix::zeros(cs.targets[i].rows(), n);
                for b in 0..f.rows() {
                    let t_row = cs.targets[i].row(b);
                    let ff_row = cs.ff_activations[i].row(b);
                    for (j, v) in f.row_mut(b).iter_mut().enumerate() {
                        *v = t_row[j].abs() - ff_row[j].abs();
                    }
                }
                (f, vec![true; n])
            }
        };

        if matches!(mode, RecurrentUpdateMode::Off) {
            updates.push(LayerUpdate {
                delta: Matrix::zeros(n, n),
                updated_rows,
            });
            continue;
        }

        let abs_targets = cs.targets[i].map(f64::abs);
        factor.scale(1.0 / batch);
        let mut delta = factor.matmul_tn(&abs_targets)?;
        for j in 0..n {
            delta.set(j, j, 0.0);
        }
        center_rows(&mut delta, &updated_rows, Some(n), per_row_centering);
        updates.push(LayerUpdate { delta, updated_rows });
    }
    Ok(updates)
}

/// Shift the entries of the updated rows to zero mean. `skip_diag` excludes
/// the structural zero diagonal of recurrent matrices from both the mean and
/// the shift.
fn center_rows(delta: &mut Matrix, updated_rows: &[bool], skip_diag: Option<usize>, per_row: bool) {
    let cols = delta.cols();
    if per_row {
        for (j, &up) in updated_rows.iter().enumerate() {
            if !up {
                continue;
            }
            let row = delta.row_mut(j);
            let denom = if skip_diag.is_some() { cols - 1 } else { cols };
            if denom == 0 {
                continue;
            }
            let mean = row.iter().sum::<f64>() / denom as f64;
            for (k, v) in row.iter_mut().enumerate() {
                if skip_diag.is_some() && k == j {
                    continue;
                }
                *v -= mean;
            }
        }
        return;
    }

    let mut sum = 0.0;
    let mut count = 0usize;
    for (j, &up) in updated_rows.iter().enumerate() {
        if !up {
            continue;
        }
        sum += delta.row(j).iter().sum::<f64>();
        count += cols - usize::from(skip_diag.is_some());
    }
    if count == 0 {
        return;
    }
    let mean = sum / count as f64;
    for (j, &up) in updated_rows.iter().enumerate() {
        if !up {
            continue;
        }
        for (k, v) in delta.row_mut(j).iter_mut().enumerate() {
            if skip_diag.is_some() && k == j {
                continue;
            }
            *v -= mean;
        }
    }
}

/// Trainer owning the parameters, their Adam state, and the dynamics config.
#[derive(Debug, Clone)]
pub struct DfcTrainer {
    pub params: NetworkParams,
    pub cfg: DfcConfig,
    adam: Vec<AdamState>,
}

impl DfcTrainer {
    pub fn new(params: NetworkParams, cfg: DfcConfig) -> Result<Self> {
        cfg.validate(params.num_layers())?;
        params.validate()?;
        let adam = params
            .weights
            .iter()
            .map(|w| AdamState::new(w.rows(), w.cols()))
            .collect();
        Ok(DfcTrainer { params, cfg, adam })
    }

    /// Standard split-MNIST architecture for a paradigm with the layer
    /// widths supplied by the caller.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        let fp = feedforward_pass(&self.params, x)?;
        Ok(argmax_rows(fp.output()))
    }

    pub fn batch_accuracy(&self, x: &Matrix, labels: &[u8]) -> Result<f64> {
        Ok(accuracy(&self.predict(x)?, labels))
    }

    /// Settle the dynamics for one batch and apply both local updates.
    /// Returns the settled state for recording and inspection.
    pub fn train_on_batch(&mut self, x: &Matrix, labels: &[u8]) -> Result<ConvergedState> {
        let fp = feedforward_pass(&self.params, x)?;
        let feedback = compute_feedback_weights(&self.params, &fp)?;
        let target = output_target(fp.output(), labels, self.cfg.target_step)?;
        let cs = simulate_dynamics(&self.params, x, &target, &feedback, &self.cfg)?;

        let forward = forward_weight_update(&cs, x, self.cfg.per_row_centering)?;
        for (i, up) in forward.into_iter().enumerate() {
            // the update is a step direction, so Adam consumes its negation
            let mut grad = up.delta;
            grad.scale(-1.0);
            let term = self.adam[i].update_term(&grad, self.cfg.lr)?;
            apply_rows_sub(&mut self.params.weights[i], &term, &up.updated_rows);
        }

        if self.cfg.recurrent_update != RecurrentUpdateMode::Off && self.cfg.recurrent_lr != 0.0 {
            let rec = recurrent_weight_update(
                &cs,
                self.cfg.recurrent_update,
                self.params.num_hidden_layers(),
                self.cfg.per_row_centering,
            )?;
            for (i, up) in rec.into_iter().enumerate() {
                apply_rows_scaled(
                    &mut self.params.recurrent[i],
                    &up.delta,
                    &up.updated_rows,
                    self.cfg.recurrent_lr,
                );
            }
        }
        Ok(cs)
    }
}

/// `params[row] -= term[row]` on updated rows only; frozen rows are never
/// touched so they stay bit-identical.
fn apply_rows_sub(params: &mut Matrix, term: &Matrix, rows: &[bool]) {
    for (j, &up) in rows.iter().enumerate() {
        if up {
            axpy(params.row_mut(j), -1.0, term.row(j));
        }
    }
}

fn apply_rows_scaled(params: &mut Matrix, delta: &Matrix, rows: &[bool], scale: f64) {
    for (j, &up) in rows.iter().enumerate() {
        if up {
            axpy(params.row_mut(j), scale, delta.row(j));
        }
    }
}

/// Table-driven defaults for the split-MNIST experiments: hidden widths and
/// steady-state sparsity levels per paradigm.
pub fn default_hidden_sizes(paradigm: Paradigm) -> Vec<usize> {
    match paradigm {
        Paradigm::DomainIl => vec![20, 20],
        Paradigm::ClassIl => vec![200, 200],
    }
}

pub fn default_sparsity(paradigm: Paradigm) -> Vec<f64> {
    match paradigm {
        Paradigm::DomainIl => vec![0.4, 0.8, 0.5],
        Paradigm::ClassIl => vec![0.2, 0.8, 0.0],
    }
}
