//! Configuration of the controlled dynamics and the local update rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How lateral recurrent weights learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentUpdateMode {
    /// Recurrent weights stay fixed.
    Off,
    /// Hebbian-style anti-update restricted to rows of suppressed neurons.
    SuppressedOnly,
    /// The general magnitude-difference rule applied to every neuron's row,
    /// used when no sparsity mask exists to restrict learning.
    AllNeurons,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DfcConfig {
    /// Membrane time constant of the neuronal dynamics.
    pub tau_v: f64,
    /// Euler step; `dt / tau_v` must lie in (0, 1].
    pub dt: f64,
    /// Hard cap on integration steps per batch.
    pub n_steps: usize,
    /// Steps over which the suppression fraction ramps from 0 to its
    /// steady-state level; convergence is only declared after the ramp.
    pub ramp_steps: usize,
    /// Proportional controller gain.
    pub k_p: f64,
    /// Integral controller gain.
    pub k_i: f64,
    /// Integral leak.
    pub alpha_u: f64,
    /// Controller time constant.
    pub tau_u: f64,
    /// Output-target step: the target is the output nudged by this fraction
    /// of the loss gradient.
    pub target_step: f64,
    /// Fraction of feedback (vs feedforward) magnitude used when scoring
    /// neurons for suppression; 0 = feedforward only, 1 = feedback only.
    pub rho: f64,
    /// Steady-state suppression fraction per non-input layer. The entry for
    /// the output layer only gates update eligibility, never activity.
    /// Empty means no sparsity anywhere.
    pub sparsity: Vec<f64>,
    /// Forward learning rate (Adam).
    pub lr: f64,
    /// Recurrent learning rate (plain gradient step, no Adam, so the
    /// deliberately large magnitude is preserved).
    pub recurrent_lr: f64,
    /// Convergence tolerance on the per-sample output error norm.
    pub conv_tol: f64,
    /// Any |v| beyond this aborts the run as diverged.
    pub divergence_limit: f64,
    /// Center updates per row instead of over all updated entries.
    pub per_row_centering: bool,
    pub recurrent_update: RecurrentUpdateMode,
}

impl Default for DfcConfig {
    fn default() -> Self {
        DfcConfig {
            tau_v: 1.0,
            dt: 0.1,
            n_steps: 300,
            ramp_steps: 150,
            k_p: 0.0,
            k_i: 1.0,
            alpha_u: 0.0,
            tau_u: 1.0,
            target_step: 0.1,
            rho: 0.5,
            sparsity: Vec::new(),
            lr: 1e-3,
            recurrent_lr: 40.0,
            conv_tol: 1e-3,
            divergence_limit: 1e6,
            per_row_centering: false,
            recurrent_update: RecurrentUpdateMode::SuppressedOnly,
        }
    }
}

impl DfcConfig {
    /// Check internal consistency against a network with `num_layers` weight
    /// layers.
    pub fn validate(&self, num_layers: usize) -> Result<()> {
        let ratio = self.dt / self.tau_v;
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Config(format!(
                "dt/tau_v = {ratio} outside the stable (0, 1] range"
            )));
        }
        if !self.sparsity.is_empty() && self.sparsity.len() != num_layers {
            return Err(Error::Config(format!(
                "sparsity has {} entries for {} layers",
                self.sparsity.len(),
                num_layers
            )));
        }
        if self.sparsity.iter().any(|s| !(0.0..1.0).contains(s)) {
            return Err(Error::Config("sparsity levels must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config("rho must lie in [0, 1]".into()));
        }
        if self.ramp_steps > self.n_steps {
            return Err(Error::Config(format!(
                "ramp_steps {} exceeds n_steps {}",
                self.ramp_steps, self.n_steps
            )));
        }
        if self.target_step < 0.0 {
            return Err(Error::Config("target_step must be >= 0".into()));
        }
        if self.conv_tol <= 0.0 || self.divergence_limit <= 0.0 {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn sparsity_for_layer(&self, layer: usize) -> f64 {
        self.sparsity.get(layer).copied().unwrap_or(0.0)
    }

    /// Scheduled suppression fraction for `layer` at integration step `step`.
    pub fn scheduled_fraction(&self, layer: usize, step: usize) -> f64 {
        let s = self.sparsity_for_layer(layer);
        if self.ramp_steps == 0 {
            return s;
        }
        s * (step as f64 / self.ramp_steps as f64).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        DfcConfig::default().validate(3).unwrap();
    }

    #[test]
    fn unstable_step_rejected() {
        let cfg = DfcConfig {
            dt: 2.0,
            ..DfcConfig::default()
        };
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn sparsity_bounds_checked() {
        let cfg = DfcConfig {
            sparsity: vec![0.4, 1.0, 0.5],
            ..DfcConfig::default()
        };
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn ramp_schedule() {
        let cfg = DfcConfig {
            sparsity: vec![0.8],
            ramp_steps: 100,
            ..DfcConfig::default()
        };
        assert_eq!(cfg.scheduled_fraction(0, 0), 0.0);
        assert!((cfg.scheduled_fraction(0, 50) - 0.4).abs() < 1e-12);
        assert_eq!(cfg.scheduled_fraction(0, 100), 0.8);
        assert_eq!(cfg.scheduled_fraction(0, 250), 0.8);
    }
}
