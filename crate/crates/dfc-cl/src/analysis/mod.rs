//! Representation-geometry metrics over recorded activations.
