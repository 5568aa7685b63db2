use serde::{Deserialize, Serialize};

use super::NoiseType;
use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::features::{frame_count, MfbConfig};

/// Ground-truth speech interval, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechSpan {
    #[serde(rename = "start_s")]
    pub start: f64,
    #[serde(rename = "end_s")]
    pub end: f64,
}

impl SpeechSpan {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(0.0 <= start && start < end && end.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid span [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Synthesized waveform with its speech spans and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub audio: AudioClip,
    pub spans: Vec<SpeechSpan>,
    pub noise_type: NoiseType,
    pub snr_db: Option<f64>,
    pub source_ids: Vec<String>,
}

impl LabeledRecording {
    pub fn duration(&self) -> f64 {
        self.audio.duration()
    }
}

/// Frame labels for spans over an `n_frames`-frame analysis grid, working in
/// whole samples. A frame is +1 iff at least half of its window overlaps
/// speech.
pub fn span_labels(
    spans: &[SpeechSpan],
    sample_rate: u32,
    n_frames: usize,
    hop_samples: usize,
    win_samples: usize,
) -> Vec<i8> {
    let sr = sample_rate as f64;
    let ranges: Vec<(usize, usize)> = spans
        .iter()
        .map(|s| ((s.start * sr).round() as usize, (s.end * sr).round() as usize))
        .collect();
    // spans are sorted; walk them with a moving cursor
    let mut first = 0;
    (0..n_frames)
        .map(|t| {
            let fs = t * hop_samples;
            let fe = fs + win_samples;
            while first < ranges.len() && ranges[first].1 <= fs {
                first += 1;
            }
            let overlap: usize = ranges[first..]
                .iter()
                .take_while(|r| r.0 < fe)
                .map(|&(s, e)| e.min(fe).saturating_sub(s.max(fs)))
                .sum();
            if 2 * overlap >= win_samples {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// One label per analysis frame for the given hop and window (seconds). The
/// count equals the feature frame count for the same hop and window.
pub fn frame_labels(rec: &LabeledRecording, hop: f64, win: f64) -> Result<Vec<i8>> {
    if !(hop > 0.0 && win >= hop) {
        return Err(Error::InvalidArgument(format!("need hop > 0 and win >= hop, got {hop}, {win}")));
    }
    let config = MfbConfig {
        hop,
        win,
        ..MfbConfig::default()
    };
    let sr = rec.audio.sample_rate();
    let n = frame_count(rec.audio.len(), &config, sr);
    Ok(span_labels(
        &rec.spans,
        sr,
        n,
        config.hop_samples(sr),
        config.win_samples(sr),
    ))
}
