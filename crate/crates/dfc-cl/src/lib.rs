//! Task-free continual learning on split-MNIST with sparse-recurrent
//! feedback-control dynamics.
//!
//! The crate implements a learner whose credit assignment runs through a
//! feedback controller: per input, neuron activities settle under top-down
//! control toward a target state, a winner-take-all mechanism ramps a fixed
//! fraction of each hidden layer to zero, lateral recurrent weights gate which
//! neurons stay active, and local weight updates move the feedforward pass
//! toward those settled targets. Because none of this needs to know where one
//! task ends and the next begins, the learner is evaluated in a task-free
//! regime against backpropagation, Elastic Weight Consolidation, and Synaptic
//! Intelligence, which do receive task boundaries.
//!
//! Module map:
//! - [`numerics`] — matrices, activations, Adam, Xavier init, singular
//!   values, L1 logistic regression
//! - [`data`] — MNIST IDX ingestion and split-MNIST task streams
//! - [`dfc`] — the controlled dynamics, sparsity, gating, and weight updates
//! - [`baselines`] — BP, EWC, and SI on the same architecture
//! - [`analysis`] — representation-geometry metrics over recorded activations
//! - [`harness`] — experiment configs, runs, sweeps, recording, CSV export

pub mod analysis;
pub mod baselines;
pub mod data;
pub mod dfc;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod seeds;

pub use error::{Error, Result};
