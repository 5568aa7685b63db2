//! Buffered two-stage streaming VAD. A cheap log-Mel stage-1 model proposes
//! segments over a sliding audio buffer; an optional stage-2 model re-scores
//! each finished segment and accepts or rejects it.

mod cascade;
mod provider;
mod ring;
mod segment;

pub use cascade::{run_file_realtime, run_samples, CascadeRuntime, LatencyReport, ReportSegment};
pub use provider::{FeatureProvider, MfbProvider, PrecomputedProvider};
pub use ring::{AudioRing, RingSnapshot};
pub use segment::{segment_scores, FrameSpan};

use serde::{Deserialize, Serialize};

use crate::audio::CANONICAL_RATE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferConfig {
    pub buffer_seconds: f64,
    pub poll_interval: f64,
    pub sample_rate: u32,
}

impl Default for BufferConfig {
    fn default() -> Self {
        Self {
            buffer_seconds: 15.0,
            poll_interval: 1.0,
            sample_rate: CANONICAL_RATE,
        }
    }
}

impl BufferConfig {
    pub fn buffer_samples(&self) -> usize {
        (self.buffer_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn poll_samples(&self) -> usize {
        (self.poll_interval * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_seconds > 0.0 && self.poll_interval > 0.0 && self.sample_rate > 0) {
            return Err(Error::Config("buffer, poll interval and sample rate must be positive".into()));
        }
        if self.poll_samples() == 0 || self.poll_samples() > self.buffer_samples() {
            return Err(Error::Config(format!(
                "poll interval {} s must be non-empty and fit in the {} s buffer",
                self.poll_interval, self.buffer_seconds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub onset_threshold: f64,
    pub offset_threshold: f64,
    pub min_segment: f64,
    pub hangover: f64,
    pub stage2_confirm_threshold: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            onset_threshold: 0.0,
            offset_threshold: -0.2,
            min_segment: 0.3,
            hangover: 0.2,
            stage2_confirm_threshold: 0.0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > -1.0 && v < 1.0;
        if !unit(self.onset_threshold) || !unit(self.offset_threshold) {
            return Err(Error::Config("onset and offset thresholds must lie in (-1, 1)".into()));
        }
        if self.offset_threshold > self.onset_threshold {
            return Err(Error::Config("offset threshold above onset threshold".into()));
        }
        if !(self.min_segment >= 0.0 && self.hangover >= 0.0) {
            return Err(Error::Config("min_segment and hangover must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Candidate,
    Confirmed,
    Rejected,
}

/// A speech segment on the absolute stream timeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentHypothesis {
    pub start: f64,
    pub end: f64,
    pub stage1_score: f64,
    pub stage2_score: Option<f64>,
    pub verdict: Verdict,
    /// Final segments are never reported again; provisional ones may grow or
    /// vanish at the next poll.
    pub is_final: bool,
}
