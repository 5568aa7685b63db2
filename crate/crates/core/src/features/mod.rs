//! Frame-level feature matrices: log-Mel filterbank extraction and the two
//! normalization regimes (training-partition statistics and per-instance).

mod mfb;
mod norm;

pub use mfb::{extract_mfb, frame_count, mel_scale, mel_to_hz, MelFilterbank, MfbConfig, MfbExtractor};
pub use norm::{denormalize, fit_stats, normalize_global, normalize_instance, NormStats, Normalization, STD_FLOOR};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Mfb,
    External,
}

impl FeatureSource {
    pub fn tag(self) -> u8 {
        match self {
            FeatureSource::Mfb => 0,
            FeatureSource::External => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FeatureSource::Mfb),
            1 => Some(FeatureSource::External),
            _ => None,
        }
    }
}

/// Row-major `frames × dims` feature values with the hop between rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    frames: usize,
    dims: usize,
    hop: f64,
    source: FeatureSource,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f64>,
        frames: usize,
        dims: usize,
        hop: f64,
        source: FeatureSource,
    ) -> Result<Self> {
        if values.len() != frames * dims {
            return Err(Error::Shape(format!(
                "{} values do not fill {frames} x {dims}",
                values.len()
            )));
        }
        if !(hop > 0.0 && hop.is_finite()) {
            return Err(Error::InvalidArgument(format!("hop must be positive, got {hop}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature values must be finite".into()));
        }
        Ok(Self {
            values,
            frames,
            dims,
            hop,
            source,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn hop(&self) -> f64 {
        self.hop
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero size
        self.values.chunks_exact(self.dims.max(1)).take(self.frames)
    }

    /// Frames `start..end` as a new matrix.
    pub fn slice_frames(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values[start * self.dims..end * self.dims].to_vec(),
            frames: end - start,
            dims: self.dims,
            hop: self.hop,
            source: self.source,
        }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> FeatureMatrix {
        debug_assert_eq!(values.len(), self.values.len());
        FeatureMatrix {
            values,
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> FeatureMatrix {
        FeatureMatrix {
            values: Vec::new(),
            frames: self.frames,
            dims: self.dims,
            hop: self.hop,
            source: self.source,
        }
    }

    /// Stacks matrices with equal dims and hop along time.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts.first().ok_or(Error::EmptyInput("nothing to concatenate"))?;
        let mut values = Vec::new();
        let mut frames = 0;
        for p in parts {
            if p.dims != first.dims {
                return Err(Error::Shape(format!("dims {} vs {}", p.dims, first.dims)));
            }
            values.extend_from_slice(&p.values);
            frames += p.frames;
        }
        Ok(FeatureMatrix {
            values,
            frames,
            ..first.clone_header()
        })
    }
}
