//! Mono audio container and the signal utilities shared by every stage.

mod resample;
mod wav;

pub use resample::{resample, Resampler};
pub use wav::{read_wav, write_wav, WavWriteStats};

use crate::error::{Error, Result};

/// Canonical processing rate. Every ingest path resamples to it.
pub const CANONICAL_RATE: u32 = 16_000;

/// Mono PCM samples at a fixed rate.
///
/// Samples are nominally in `[-1, +1]` but the range is not enforced: noisy
/// mixes are kept unclipped in memory so their SNR stays exact, and clipping
/// only happens at WAV export.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(n_samples: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; n_samples], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copy of `range` (in samples) as a new clip.
    pub fn slice(&self, start: usize, end: usize) -> AudioClip {
        AudioClip {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Root-mean-square level of the whole clip.
pub fn rms(clip: &AudioClip) -> Result<f64> {
    rms_of(clip.samples())
}

pub(crate) fn rms_of(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("rms of an empty clip"));
    }
    let energy: f64 = samples.iter().map(|s| s * s).sum();
    Ok((energy / samples.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rms_constant() {
        let clip = AudioClip::new(vec![0.5; 100], 16_000).unwrap();
        assert!((rms(&clip).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rms_sine_whole_periods() {
        let n = 16_000;
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 100.0 * i as f64 / 16_000.0).sin())
            .collect();
        let clip = AudioClip::new(samples, 16_000).unwrap();
        assert!((rms(&clip).unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rms_three_four() {
        let clip = AudioClip::new(vec![3.0, 4.0], 16_000).unwrap();
        // sqrt((9 + 16) / 2)
        assert!((rms(&clip).unwrap() - 3.535_533_905_932_737_6).abs() < 1e-12);
    }

    #[test]
    fn rms_empty_is_error() {
        let clip = AudioClip::new(vec![], 16_000).unwrap();
        assert!(matches!(rms(&clip), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn rejects_bad_clips() {
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 16_000).is_err());
    }

    proptest! {
        #[test]
        fn rms_is_homogeneous(
            samples in prop::collection::vec(-1.0f64..1.0, 1..200),
            alpha in -10.0f64..10.0,
        ) {
            let clip = AudioClip::new(samples, 16_000).unwrap();
            let base = rms(&clip).unwrap();
            let scaled = rms(&clip.scaled(alpha)).unwrap();
            let expected = alpha.abs() * base;
            prop_assert!((scaled - expected).abs() <= 1e-12 * expected.max(1e-300));
        }
    }
}
