use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, MfbConfig, MfbExtractor};

/// Supplies stage-2 features for a segment, given its audio and its place on
/// the absolute timeline.
pub trait FeatureProvider: Send + Sync {
    fn features(&self, audio: &[f64], start_s: f64, end_s: f64) -> Result<FeatureMatrix>;

    fn name(&self) -> &str;
}

/// Log-Mel features computed in process from the segment audio.
pub struct MfbProvider {
    extractor: MfbExtractor,
}

impl MfbProvider {
    pub fn new(config: &MfbConfig, sample_rate: u32) -> Result<Self> {
        Ok(Self {
            extractor: MfbExtractor::new(config, sample_rate)?,
        })
    }
}

impl FeatureProvider for MfbProvider {
    fn features(&self, audio: &[f64], _start_s: f64, _end_s: f64) -> Result<FeatureMatrix> {
        Ok(self.extractor.extract_samples(audio))
    }

    fn name(&self) -> &str {
        "mfb"
    }
}

/// Precomputed frames for the whole stream (for example exported SSL
/// embeddings), sliced by time.
pub struct PrecomputedProvider {
    features: FeatureMatrix,
}

impl PrecomputedProvider {
    pub fn new(features: FeatureMatrix) -> Result<Self> {
        if features.frames() == 0 {
            return Err(Error::EmptyInput("precomputed stage-2 features"));
        }
        Ok(Self { features })
    }
}

impl FeatureProvider for PrecomputedProvider {
    fn features(&self, _audio: &[f64], start_s: f64, end_s: f64) -> Result<FeatureMatrix> {
        let hop = self.features.hop();
        let n = self.features.frames();
        let a = ((start_s / hop).floor() as usize).min(n);
        let b = ((end_s / hop).ceil() as usize).clamp(a, n);
        Ok(self.features.slice_frames(a, b))
    }

    fn name(&self) -> &str {
        "precomputed"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSource;

    #[test]
    fn precomputed_slices_by_time() {
        let f = FeatureMatrix::new((0..10).map(f64::from).collect(), 10, 1, 0.02, FeatureSource::External).unwrap();
        let p = PrecomputedProvider::new(f).unwrap();
        let s = p.features(&[], 0.05, 0.11).unwrap();
        assert_eq!(s.values(), &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p.features(&[], 0.5, 0.9).unwrap().frames(), 0);
    }
}
