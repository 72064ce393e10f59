//! Network parameters: forward weights, lateral recurrent weights, and
//! checkpoint round-tripping.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Activation, Matrix};
use crate::seeds;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Weights of an L-layer network. `layer_sizes` runs input → output; weight
/// layer `i` (0-based) maps width `layer_sizes[i]` to `layer_sizes[i+1]`.
/// Hidden layers (all but the last weight layer) additionally carry a square
/// recurrent gating matrix with zero diagonal. Feedback weights are not
/// stored: they are recomputed per datapoint as the transposed output
/// Jacobian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkParams {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    pub weights: Vec<Matrix>,
    pub recurrent: Vec<Matrix>,
}

impl NetworkParams {
    /// Xavier-initialized forward weights, zero recurrent weights. The layer
    /// activations are `hidden` everywhere except the readout, which uses
    /// `output`.
    pub fn new(
        layer_sizes: &[usize],
        hidden: Activation,
        output: Activation,
        seed: u64,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config("need at least input and output layers".into()));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        let num_layers = layer_sizes.len() - 1;
        let mut weights = Vec::with_capacity(num_layers);
        let mut activations = Vec::with_capacity(num_layers);
        for i in 0..num_layers {
            weights.push(xavier_init(
                layer_sizes[i],
                layer_sizes[i + 1],
                seeds::derive(seed, i as u64),
            )?);
            activations.push(if i + 1 == num_layers { output } else { hidden });
        }
        let recurrent = (0..num_layers.saturating_sub(1))
            .map(|i| Matrix::zeros(layer_sizes[i + 1], layer_sizes[i + 1]))
            .collect();
        Ok(NetworkParams {
            layer_sizes: layer_sizes.to_vec(),
            activations,
            weights,
            recurrent,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of weight layers L.
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_hidden_layers(&self) -> usize {
        self.recurrent.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Width of the layer produced by weight layer `i` (0-based).
    pub fn width(&self, i: usize) -> usize {
        self.layer_sizes[i + 1]
    }

    pub fn activation(&self, i: usize) -> Activation {
        self.activations[i]
    }

    pub fn set_activations(&mut self, hidden: Activation, output: Activation) {
        let last = self.activations.len() - 1;
        for (i, a) in self.activations.iter_mut().enumerate() {
            *a = if i == last { output } else { hidden };
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.weights.iter().enumerate() {
            if w.shape() != (self.layer_sizes[i + 1], self.layer_sizes[i]) {
                return Err(Error::ShapeMismatch(format!(
                    "weight layer {i}: {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    self.layer_sizes[i + 1],
                    self.layer_sizes[i]
                )));
            }
        }
        for (i, r) in self.recurrent.iter().enumerate() {
            let n = self.layer_sizes[i + 1];
            if r.shape() != (n, n) {
                return Err(Error::ShapeMismatch(format!(
                    "recurrent layer {i}: {}x{}, expected {n}x{n}",
                    r.rows(),
                    r.cols()
                )));
            }
            if (0..n).any(|j| r.get(j, j) != 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "recurrent layer {i} has non-zero diagonal"
                )));
            }
        }
        Ok(())
    }
}

/// Self-describing parameter dump. JSON with an explicit version field; the
/// config fingerprint ties a checkpoint back to the resolved run config.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_fingerprint: String,
    pub params: NetworkParams,
}

impl Checkpoint {
    pub fn new(params: &NetworkParams, config_fingerprint: impl Into<String>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_fingerprint: config_fingerprint.into(),
            params: params.clone(),
        }
    }

    pub fn write(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer(w, self)
            .map_err(|e| Error::InvalidArgument(format!("checkpoint encode: {e}")))
    }

    pub fn read(r: impl Read) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(r)
            .map_err(|e| Error::InvalidArgument(format!("checkpoint decode: {e}")))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        ck.params.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref())
            .map_err(|e| Error::io(format!("creating {}", path.as_ref().display()), e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::io(format!("opening {}", path.as_ref().display()), e))?;
        Self::read(std::io::BufReader::new(f))
    }
}
