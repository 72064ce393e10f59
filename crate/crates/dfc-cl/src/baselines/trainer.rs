//! Adam-driven training loop shared by the three baselines, with boundary
//! consolidation hooks for EWC and SI.

use super::bp::{bp_grads, BpNet};
use super::ewc::EwcState;
use super::si::SiState;
use crate::error::{Error, Result};
use crate::numerics::{Activation, AdamState, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Bp,
    Ewc,
    Si,
}

#[derive(Debug, Clone)]
pub struct BaselineTrainer {
    pub net: BpNet,
    pub kind: BaselineKind,
    pub lr: f64,
    adam: Vec<AdamState>,
    pub ewc: Option<EwcState>,
    pub si: Option<SiState>,
    boundary_calls: usize,
}

impl BaselineTrainer {
    pub fn new(
        layer_sizes: &[usize],
        activation: Activation,
        kind: BaselineKind,
        lr: f64,
        reg_coeff: f64,
        seed: u64,
    ) -> Result<Self> {
        let net = BpNet::new(layer_sizes, activation, seed)?;
        let adam = net
            .params
            .weights
            .iter()
            .map(|w| AdamState::new(w.rows(), w.cols()))
            .collect();
        let ewc = matches!(kind, BaselineKind::Ewc).then(|| EwcState::new(&net, reg_coeff));
        let si = matches!(kind, BaselineKind::Si).then(|| SiState::new(&net, reg_coeff));
        Ok(BaselineTrainer {
            net,
            kind,
            lr,
            adam,
            ewc,
            si,
            boundary_calls: 0,
        })
    }

    /// Loss gradients including the active regularization penalty. Inactive
    /// penalties (coefficient 0 or nothing consolidated yet) are skipped
    /// entirely so those paths match plain BP bit for bit.
    pub fn loss_grads(&self, x: &Matrix, labels: &[u8]) -> Result<Vec<Matrix>> {
        let mut grads = bp_grads(&self.net, x, labels)?;
        if let Some(ewc) = self.ewc.as_ref().filter(|s| s.active()) {
            for (g, p) in grads.iter_mut().zip(ewc.penalty_grads(&self.net)?) {
                g.add_assign(&p)?;
            }
        }
        if let Some(si) = self.si.as_ref().filter(|s| s.active()) {
            for (g, p) in grads.iter_mut().zip(si.penalty_grads(&self.net)?) {
                g.add_assign(&p)?;
            }
        }
        Ok(grads)
    }

    pub fn train_on_batch(&mut self, x: &Matrix, labels: &[u8]) -> Result<()> {
        let grads = self.loss_grads(x, labels)?;
        let mut deltas = Vec::with_capacity(grads.len());
        for (i, g) in grads.iter().enumerate() {
            let term = self.adam[i].update_term(g, self.lr)?;
            self.net.params.weights[i].sub_assign(&term)?;
            deltas.push(term);
        }
        if let Some(si) = self.si.as_mut() {
            // param_delta is the negated update term
            for d in &mut deltas {
                d.scale(-1.0);
            }
            si.step_accumulate(&grads, &deltas)?;
        }
        Ok(())
    }

    /// Task-boundary hook. Plain BP must never receive boundary information;
    /// calling this on a BP trainer is a contract violation.
    pub fn task_boundary(&mut self, task_inputs: &Matrix, seed: u64) -> Result<()> {
        self.boundary_calls += 1;
        match self.kind {
            BaselineKind::Bp => Err(Error::InvalidArgument(
                "BP received a task-boundary callback".into(),
            )),
            BaselineKind::Ewc => {
                let ewc = self.ewc.as_mut().expect("ewc state");
                let n = ewc.fisher_samples;
                ewc.consolidate(&self.net, task_inputs, n, seed)
            }
            BaselineKind::Si => self.si.as_mut().expect("si state").consolidate(&self.net),
        }
    }

    pub fn boundary_calls(&self) -> usize {
        self.boundary_calls
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        self.net.predict(x)
    }

    pub fn batch_accuracy(&self, x: &Matrix, labels: &[u8]) -> Result<f64> {
        self.net.batch_accuracy(x, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_batch(seed: u64) -> (Matrix, Vec<u8>) {
        let x = Matrix::from_fn(16, 6, |i, j| (((i * 6 + j) as f64 + seed as f64) * 0.29).sin());
        let y = (0..16).map(|i| (i % 2) as u8).collect();
        (x, y)
    }

    fn run_steps(kind: BaselineKind, coeff: f64, boundaries: bool) -> Vec<Matrix> {
        let mut t =
            BaselineTrainer::new(&[6, 8, 2], Activation::Relu, kind, 1e-3, coeff, 42).unwrap();
        for round in 0..3 {
            let (x, y) = toy_batch(round);
            for _ in 0..5 {
                t.train_on_batch(&x, &y).unwrap();
            }
            if boundaries && kind != BaselineKind::Bp {
                t.task_boundary(&x, 100 + round).unwrap();
            }
        }
        t.net.params.weights
    }

    #[test]
    fn zero_coefficient_matches_bp_bitwise() {
        let bp = run_steps(BaselineKind::Bp, 0.0, false);
        let ewc = run_steps(BaselineKind::Ewc, 0.0, true);
        let si = run_steps(BaselineKind::Si, 0.0, true);
        for ((a, b), c) in bp.iter().zip(&ewc).zip(&si) {
            assert_eq!(a, b, "ewc with c=0 diverged from bp");
            assert_eq!(a, c, "si with c=0 diverged from bp");
        }
    }

    #[test]
    fn nonzero_coefficient_changes_trajectory() {
        let bp = run_steps(BaselineKind::Bp, 0.0, false);
        let ewc = run_steps(BaselineKind::Ewc, 200.0, true);
        assert_ne!(bp[0], ewc[0]);
    }

    #[test]
    fn bp_rejects_boundary_information() {
        let mut t =
            BaselineTrainer::new(&[6, 8, 2], Activation::Relu, BaselineKind::Bp, 1e-3, 0.0, 1)
                .unwrap();
        let (x, _) = toy_batch(0);
        assert!(t.task_boundary(&x, 0).is_err());
    }

    #[test]
    fn shared_initialization_across_methods() {
        let bp =
            BaselineTrainer::new(&[6, 8, 2], Activation::Relu, BaselineKind::Bp, 1e-3, 0.0, 9)
                .unwrap();
        let ewc =
            BaselineTrainer::new(&[6, 8, 2], Activation::Relu, BaselineKind::Ewc, 1e-3, 200.0, 9)
                .unwrap();
        let si =
            BaselineTrainer::new(&[6, 8, 2], Activation::Relu, BaselineKind::Si, 1e-3, 10.0, 9)
                .unwrap();
        for (a, b) in bp.net.params.weights.iter().zip(&ewc.net.params.weights) {
            assert_eq!(a, b);
        }
        for (a, b) in bp.net.params.weights.iter().zip(&si.net.params.weights) {
            assert_eq!(a, b);
        }
    }
}
