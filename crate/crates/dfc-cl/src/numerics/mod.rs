//! Numeric substrate: dense matrices, activations, Adam, initializers,
//! singular values, and an L1-penalized logistic fitter.
//!
//! Everything here is a pure function of its inputs (RNG seeds are passed
//! explicitly), so concurrent use on distinct data is safe.

pub mod activation;
pub mod adam;
pub mod init;
pub mod logistic;
pub mod matrix;
pub mod softmax;
pub mod svd;

pub use activation::{sigmoid, Activation};
pub use adam::{adam_step, AdamState};
pub use init::xavier_init;
pub use logistic::{fit_l1_logistic, fit_l1_logistic_traced, LogisticModel};
pub use matrix::Matrix;
pub use svd::singular_values;
