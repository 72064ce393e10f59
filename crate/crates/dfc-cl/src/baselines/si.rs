//! Synaptic Intelligence: online path-integral importance with damped
//! normalization at task boundaries.

use super::bp::BpNet;
use crate::error::Result;
use crate::numerics::Matrix;

pub const DEFAULT_SI_DAMPING: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SiState {
    /// Running per-parameter contribution of the current task,
    /// `sum_steps (-grad) .* delta`.
    pub omega_running: Vec<Matrix>,
    /// Consolidated importance Omega.
    pub importance: Vec<Matrix>,
    /// Parameters at the last consolidation.
    pub anchors: Vec<Matrix>,
    pub damping: f64,
    pub coeff: f64,
    pub consolidated_tasks: usize,
}

impl SiState {
    pub fn new(net: &BpNet, coeff: f64) -> Self {
        let zeros: Vec<Matrix> = net
            .params
            .weights
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect();
        SiState {
            omega_running: zeros.clone(),
            importance: zeros,
            anchors: net.params.weights.clone(),
            damping: DEFAULT_SI_DAMPING,
            coeff,
            consolidated_tasks: 0,
        }
    }

    /// Credit each parameter's motion with the loss decrease it produced:
    /// `omega += (-grad) .* param_delta`. Call after every optimizer step
    /// with the gradient that was actually applied.
    pub fn step_accumulate(&mut self, grads: &[Matrix], deltas: &[Matrix]) -> Result<()> {
        for ((o, g), d) in self.omega_running.iter_mut().zip(grads).zip(deltas) {
            for ((ov, &gv), &dv) in o.as_mut_slice().iter_mut().zip(g.as_slice()).zip(d.as_slice())
            {
                *ov += -gv * dv;
            }
        }
        Ok(())
    }

    /// Fold the running path integral into the consolidated importance,
    /// normalized by the squared parameter displacement over the task plus
    /// damping; reset the integral and move the anchors.
    pub fn consolidate(&mut self, net: &BpNet) -> Result<()> {
        for ((omega, imp), (w, anchor)) in self
            .omega_running
            .iter_mut()
            .zip(&mut self.importance)
            .zip(net.params.weights.iter().zip(&self.anchors))
        {
            for ((&ov, iv), (&wv, &av)) in omega
                .as_slice()
                .iter()
                .zip(imp.as_mut_slice())
                .zip(w.as_slice().iter().zip(anchor.as_slice()))
            {
                let disp = wv - av;
                *iv += ov.max(0.0) / (disp * disp + self.damping);
            }
            omega.fill(0.0);
        }
        self.anchors = net.params.weights.clone();
        self.consolidated_tasks += 1;
        Ok(())
    }

    /// Gradient of the quadratic penalty: `coeff * Omega .* (theta - anchor)`.
    pub fn penalty_grads(&self, net: &BpNet) -> Result<Vec<Matrix>> {
        let mut out = Vec::with_capacity(net.params.num_layers());
        for ((w, imp), a) in net.params.weights.iter().zip(&self.importance).zip(&self.anchors) {
            let mut g = w.sub(a)?;
            for (gv, &iv) in g.as_mut_slice().iter_mut().zip(imp.as_slice()) {
                *gv *= self.coeff * iv;
            }
            out.push(g);
        }
        Ok(out)
    }

    /// Penalty value consistent with [`SiState::penalty_grads`].
    pub fn penalty_value(&self, net: &BpNet) -> Result<f64> {
        let mut total = 0.0;
        for ((w, imp), a) in net.params.weights.iter().zip(&self.importance).zip(&self.anchors) {
            for ((&wv, &iv), &av) in w.as_slice().iter().zip(imp.as_slice()).zip(a.as_slice()) {
                total += iv * (wv - av) * (wv - av);
            }
        }
        Ok(0.5 * self.coeff * total)
    }

    pub fn active(&self) -> bool {
        self.coeff != 0.0 && self.consolidated_tasks > 0
    }
}
