//! Ties manifests, feature files and label sidecars together.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{read_wav, resample, CANONICAL_RATE};
use crate::corpus::{read_labels, span_labels, Manifest, ManifestEntry, Partition};
use crate::error::{Error, Result};
use crate::features::{frame_count, FeatureMatrix, FeatureSource, MfbConfig, MfbExtractor};
use crate::gru::TrainSequence;
use crate::store;

/// Where the features of `entry` live under `features_dir`.
pub fn feature_path(features_dir: &Path, entry: &ManifestEntry) -> PathBuf {
    features_dir.join(format!("{}.vfe", entry.stem()))
}

fn entry_error(entry: &ManifestEntry, err: Error) -> Error {
    match err {
        Error::Manifest { .. } => err,
        other => Error::Manifest {
            entry: entry.audio.clone(),
            message: other.to_string(),
        },
    }
}

/// Extracts MFB features for every entry and writes them under `out_dir`,
/// mirroring the manifest layout. Returns the written paths in manifest order.
pub fn extract_manifest(manifest: &Manifest, out_dir: &Path, config: &MfbConfig) -> Result<Vec<PathBuf>> {
    let extractor = MfbExtractor::new(config, CANONICAL_RATE)?;
    manifest
        .entries
        .par_iter()
        .map(|entry| {
            let clip = read_wav(manifest.resolve(&entry.audio)).map_err(|e| entry_error(entry, e))?;
            let clip = resample(&clip, CANONICAL_RATE)?;
            let features = extractor.extract(&clip)?;
            let path = feature_path(out_dir, entry);
            store::save(&features, &path)?;
            Ok(path)
        })
        .collect()
}

/// Frame labels matching `features`. MFB frames are labelled directly from
/// the spans; external frames get labels on the MFB grid, then aligned.
pub fn labels_for(entry: &ManifestEntry, spans: &[crate::corpus::SpeechSpan], features: &FeatureMatrix, config: &MfbConfig) -> Result<Vec<i8>> {
    let sr = CANONICAL_RATE;
    let (hop, win) = (config.hop_samples(sr), config.win_samples(sr));
    match features.source() {
        FeatureSource::Mfb => {
            let feature_hop = (features.hop() * sr as f64).round() as usize;
            if feature_hop != hop {
                return Err(Error::Manifest {
                    entry: entry.audio.clone(),
                    message: format!("feature hop {} s does not match the MFB config", features.hop()),
                });
            }
            Ok(span_labels(spans, sr, features.frames(), hop, win))
        }
        FeatureSource::External => {
            let n = (entry.duration_s * sr as f64).round() as usize;
            let grid = frame_count(n, config, sr);
            if grid == 0 {
                return Err(Error::Manifest {
                    entry: entry.audio.clone(),
                    message: "recording shorter than one analysis window".into(),
                });
            }
            let base = span_labels(spans, sr, grid, hop, win);
            store::align_labels(&base, config.hop, features.hop(), features.frames())
        }
    }
}

/// Features and aligned labels for one manifest entry.
pub fn load_entry(manifest: &Manifest, entry: &ManifestEntry, features_dir: &Path, config: &MfbConfig) -> Result<TrainSequence> {
    let path = feature_path(features_dir, entry);
    if !path.is_file() {
        return Err(Error::Manifest {
            entry: entry.audio.clone(),
            message: format!("missing feature file {}", path.display()),
        });
    }
    let load = || -> Result<TrainSequence> {
        let features = store::load(&path)?;
        let sidecar = read_labels(manifest.resolve(&entry.labels))?;
        let labels = labels_for(entry, &sidecar.spans, &features, config)?;
        TrainSequence::new(features, labels)
    };
    load().map_err(|e| entry_error(entry, e))
}

/// Loads the entries of one partition (all entries when `None`), in
/// manifest order.
pub fn load_partition(
    manifest: &Manifest,
    partition: Option<Partition>,
    features_dir: &Path,
    config: &MfbConfig,
) -> Result<Vec<(ManifestEntry, TrainSequence)>> {
    manifest
        .entries
        .par_iter()
        .filter(|e| partition.is_none_or(|p| e.partition == p))
        .map(|e| Ok((e.clone(), load_entry(manifest, e, features_dir, config)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{NoiseType, SpeechSpan};

    fn entry(duration: f64) -> ManifestEntry {
        ManifestEntry {
            audio: "test/a.wav".into(),
            labels: "test/a.labels.json".into(),
            noise: NoiseType::Clean,
            snr_db: None,
            partition: Partition::Test,
            duration_s: duration,
        }
    }

    #[test]
    fn external_labels_are_aligned_to_feature_rate() {
        let spans = [SpeechSpan::new(1.0, 2.0).unwrap()];
        let cfg = MfbConfig::default();
        // 20 ms stride, 3 s of audio
        let f = FeatureMatrix::new(vec![0.0; 149 * 2], 149, 2, 0.02, FeatureSource::External).unwrap();
        let labels = labels_for(&entry(3.0), &spans, &f, &cfg).unwrap();
        assert_eq!(labels.len(), 149);
        // frame i maps to MFB frame 2i; MFB frame t is speech from t = 99
        // (window start 15840 of 16000 leaves 240 overlapping samples)
        assert_eq!(labels[49], -1);
        assert_eq!(labels[50], 1);
        assert_eq!(labels[99], 1);
        assert_eq!(labels[100], -1);
    }

    #[test]
    fn mfb_hop_mismatch_is_reported() {
        let f = FeatureMatrix::new(vec![0.0; 4], 2, 2, 0.02, FeatureSource::Mfb).unwrap();
        let r = labels_for(&entry(1.0), &[], &f, &MfbConfig::default());
        assert!(matches!(r, Err(Error::Manifest { .. })));
    }

    #[test]
    fn missing_features_name_the_entry() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            root: dir.path().into(),
            entries: vec![entry(1.0)],
        };
        match load_entry(&m, &m.entries[0], dir.path(), &MfbConfig::default()) {
            Err(Error::Manifest { entry, .. }) => assert_eq!(entry, "test/a.wav"),
            other => panic!("{other:?}"),
        }
    }
}
