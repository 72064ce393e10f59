//! Sparse-recurrent feedback-control learning: controlled neuronal dynamics,
//! dynamic winner-take-all sparsity, lateral recurrent gating, and the local
//! weight-update rules driven by the settled state.

pub mod config;
pub mod dynamics;
pub mod params;
pub mod update;

pub use config::{DfcConfig, RecurrentUpdateMode};
pub use dynamics::{
    apply_recurrent_gating, compute_feedback_weights, feedforward_pass, output_target,
    simulate_dynamics, wta_select, BoolMat, ConvergedState, FeedbackWeights, ForwardPass,
};
pub use params::{Checkpoint, NetworkParams, CHECKPOINT_VERSION};
pub use update::{
    default_hidden_sizes, default_sparsity, forward_weight_update, recurrent_weight_update,
    DfcTrainer, LayerUpdate,
};
