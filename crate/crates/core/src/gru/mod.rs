//! Recurrent VAD: stacked GRU layers, a linear head to one output and a tanh
//! squashing scores into `(-1, +1)` (non-speech to speech).
//!
//! Gate convention, per layer and frame:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)          update ("keep") gate
//! r  = σ(W_r x + U_r h + b_r)          reset gate
//! c  = tanh(W_h x + U_h (r ⊙ h) + b_h) candidate
//! h' = (1 - z) ⊙ c + z ⊙ h
//! ```
//!
//! and `score = tanh(w_out · h_top + b_out)`.

mod adam;
mod cell;
mod checkpoint;
mod params;
mod train;

pub use adam::Adam;
pub use cell::{backward, forward, forward_rows, loss, loss_gradient, Backward, HiddenState};
pub use checkpoint::{decode_params, encode_params, load_params, save_params};
pub use params::{GruLayer, GruVadParams};
pub use train::{train, EpochReport, TrainReport, TrainSequence};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean squared error against ±1 targets.
    Mse,
    /// Binary cross-entropy on `(score + 1) / 2`.
    Bce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GruVadConfig {
    pub input_dim: usize,
    pub layers: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Sequences (recordings) per optimizer step.
    pub batch: usize,
    /// Frames per truncated-BPTT chunk.
    pub bptt_chunk: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for GruVadConfig {
    fn default() -> Self {
        Self {
            input_dim: 80,
            layers: 1,
            hidden: 64,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch: 1,
            bptt_chunk: 500,
            epochs: 20,
            loss: LossKind::Mse,
            seed: 0,
        }
    }
}

impl GruVadConfig {
    /// Named topologies from the `{1L64N, 2L128N, 4L256N}` grid.
    pub fn topology(name: &str) -> Result<(usize, usize)> {
        let (layers, hidden) = name
            .strip_suffix('N')
            .and_then(|s| s.split_once('L'))
            .and_then(|(l, h)| Some((l.parse().ok()?, h.parse().ok()?)))
            .ok_or_else(|| Error::InvalidArgument(format!("topology {name:?} is not of the form <L>L<N>N")))?;
        Ok((layers, hidden))
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.layers == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument("input_dim, layers and hidden must be positive".into()));
        }
        if self.batch == 0 || self.bptt_chunk == 0 {
            return Err(Error::InvalidArgument("batch and bptt_chunk must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}
