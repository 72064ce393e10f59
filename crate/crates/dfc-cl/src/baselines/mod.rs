//! Backpropagation, Elastic Weight Consolidation, and Synaptic Intelligence
//! on the same MLP architecture as the feedback-control learner. Task
//! boundary hooks exist only here: EWC and SI consolidate at boundaries,
//! plain BP ignores them.

pub mod bp;
pub mod ewc;
pub mod si;
pub mod trainer;

pub use bp::{bp_grads, bp_loss, BpNet};
pub use ewc::EwcState;
pub use si::SiState;
pub use trainer::{BaselineKind, BaselineTrainer};
