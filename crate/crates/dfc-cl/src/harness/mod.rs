//! Experiment orchestration.
