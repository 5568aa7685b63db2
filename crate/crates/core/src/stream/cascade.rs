use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::{segment_scores, AudioRing, BufferConfig, CascadeConfig, FeatureProvider, SegmentHypothesis, Verdict};
use crate::audio::{read_wav, resample};
use crate::error::{Error, Result};
use crate::features::{normalize_instance, MfbConfig, MfbExtractor, Normalization};
use crate::gru::{forward, GruVadParams};

struct Stage2 {
    params: GruVadParams,
    provider: Box<dyn FeatureProvider>,
    norm: Normalization,
}

/// Push/poll runtime. Decisions depend only on the buffer contents at each
/// poll, so they are a pure function of the audio and the poll clock.
pub struct CascadeRuntime {
    buffer: BufferConfig,
    cascade: CascadeConfig,
    ring: AudioRing,
    extractor: MfbExtractor,
    stage1: GruVadParams,
    stage2: Option<Stage2>,
    /// Absolute sample before which everything has been decided.
    decided_until: u64,
    stage2_calls: usize,
}

impl CascadeRuntime {
    /// Builds a runtime. A stage-2 model without a feature provider is a
    /// configuration error; no stage-2 model means stage-1 decisions only.
    pub fn new(
        buffer: BufferConfig,
        cascade: CascadeConfig,
        mfb: &MfbConfig,
        stage1: GruVadParams,
        stage2: Option<(GruVadParams, Normalization)>,
        provider: Option<Box<dyn FeatureProvider>>,
    ) -> Result<Self> {
        buffer.validate()?;
        cascade.validate()?;
        let extractor = MfbExtractor::new(mfb, buffer.sample_rate)?;
        stage1
            .check_input(mfb.n_mels)
            .map_err(|e| Error::Config(format!("stage-1 model: {e}")))?;
        let stage2 = match (stage2, provider) {
            (None, _) => None,
            (Some(_), None) => return Err(Error::Config("stage-2 model given without a feature provider".into())),
            (Some((params, norm)), Some(provider)) => Some(Stage2 { params, provider, norm }),
        };
        Ok(Self {
            ring: AudioRing::new(buffer.buffer_samples()),
            buffer,
            cascade,
            extractor,
            stage1,
            stage2,
            decided_until: 0,
            stage2_calls: 0,
        })
    }

    /// Producer handle to the audio buffer.
    pub fn ring(&self) -> AudioRing {
        self.ring.clone()
    }

    pub fn push_audio(&self, chunk: &[f64]) {
        self.ring.push(chunk);
    }

    pub fn buffer_config(&self) -> &BufferConfig {
        &self.buffer
    }

    pub fn stage2_calls(&self) -> usize {
        self.stage2_calls
    }

    /// Re-analyses the buffer. Final segments come first in time order and
    /// are never repeated; the rest are provisional candidates.
    pub fn poll(&mut self) -> Result<Vec<SegmentHypothesis>> {
        self.analyse(false)
    }

    /// Decides everything still in the buffer, closing any open segment at
    /// the newest sample. Call once at end of stream.
    pub fn flush(&mut self) -> Result<Vec<SegmentHypothesis>> {
        self.analyse(true)
    }

    fn analyse(&mut self, finish: bool) -> Result<Vec<SegmentHypothesis>> {
        let snap = self.ring.snapshot();
        let sr = self.buffer.sample_rate as f64;
        let features = self.extractor.extract_samples(&snap.samples);
        if features.frames() == 0 {
            return Ok(Vec::new());
        }
        let (scores, _) = forward(&self.stage1, &normalize_instance(&features), None)?;
        let hop = self.extractor.config().hop_samples(self.buffer.sample_rate) as u64;
        let spans = segment_scores(&scores, features.hop(), &self.cascade);

        // the next poll drops everything before this sample
        let next_start = (snap.end() + self.buffer.poll_samples() as u64).saturating_sub(self.buffer.buffer_samples() as u64);
        let min_samples = (self.cascade.min_segment * sr - 1e-6).ceil().max(1.0) as u64;
        let mut out = Vec::new();
        for span in spans {
            let mut a = snap.start + span.start as u64 * hop;
            let b = snap.start + span.end as u64 * hop;
            if b <= self.decided_until {
                continue;
            }
            if a < self.decided_until {
                a = self.decided_until;
            }
            if b - a < min_samples {
                continue;
            }
            let is_final = finish || a < next_start;
            let (fa, fb) = (((a - snap.start) / hop) as usize, span.end);
            let fa = fa.min(fb - 1);
            let stage1_score = scores[fa..fb].iter().sum::<f64>() / (fb - fa) as f64;
            let mut seg = SegmentHypothesis {
                start: a as f64 / sr,
                end: b as f64 / sr,
                stage1_score,
                stage2_score: None,
                verdict: Verdict::Candidate,
                is_final,
            };
            if is_final {
                let audio = &snap.samples[(a - snap.start) as usize..(b - snap.start) as usize];
                self.verify(&mut seg, audio)?;
                self.decided_until = b;
            }
            out.push(seg);
        }
        Ok(out)
    }

    fn verify(&mut self, seg: &mut SegmentHypothesis, audio: &[f64]) -> Result<()> {
        let Some(stage2) = &self.stage2 else { return Ok(()) };
        self.stage2_calls += 1;
        let f = stage2.provider.features(audio, seg.start, seg.end)?;
        let score = if f.frames() == 0 {
            -1.0
        } else {
            let (s, _) = forward(&stage2.params, &stage2.norm.apply(&f)?, None)?;
            s.iter().sum::<f64>() / s.len() as f64
        };
        seg.stage2_score = Some(score);
        seg.verdict = if score >= self.cascade.stage2_confirm_threshold {
            Verdict::Confirmed
        } else {
            Verdict::Rejected
        };
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub stage1: f64,
    pub stage2: Option<f64>,
}

/// Timing and decisions of one replay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub max_poll_s: f64,
    pub mean_poll_s: f64,
    /// Total poll time over audio duration.
    pub rtf: f64,
    /// Accepted speech segments: confirmed ones, or every final segment when
    /// there is no stage 2.
    pub segments: Vec<ReportSegment>,
    pub rejected: usize,
    pub polls: usize,
    pub audio_s: f64,
    pub buffer_s: f64,
    pub poll_interval_s: f64,
    /// Set when some poll took at least one poll interval.
    pub violation: bool,
}

impl LatencyReport {
    /// Segment decisions only, without timings.
    pub fn decisions(&self) -> (&[ReportSegment], usize) {
        (&self.segments, self.rejected)
    }
}

/// Replays samples at the runtime's rate: pushes `chunk_seconds` at a time,
/// polling whenever the audio clock crosses a poll boundary, then flushes.
pub fn run_samples(runtime: &mut CascadeRuntime, samples: &[f64], chunk_seconds: f64) -> Result<LatencyReport> {
    let cfg = runtime.buffer_config().clone();
    let sr = cfg.sample_rate as f64;
    let chunk = ((chunk_seconds * sr).round() as usize).max(1);
    let poll = cfg.poll_samples();
    let mut times = Vec::new();
    let mut finals = Vec::new();
    let mut pos = 0usize;
    let mut next_poll = poll;
    while pos < samples.len() {
        // never push across a poll boundary
        let end = (pos + chunk).min(next_poll).min(samples.len());
        runtime.push_audio(&samples[pos..end]);
        pos = end;
        if pos == next_poll {
            let t = Instant::now();
            let segs = runtime.poll()?;
            times.push(t.elapsed().as_secs_f64());
            finals.extend(segs.into_iter().filter(|s| s.is_final));
            next_poll += poll;
        }
    }
    if !samples.is_empty() {
        let t = Instant::now();
        let segs = runtime.flush()?;
        times.push(t.elapsed().as_secs_f64());
        finals.extend(segs.into_iter().filter(|s| s.is_final));
    }
    let audio_s = samples.len() as f64 / sr;
    let total: f64 = times.iter().sum();
    let max_poll_s = times.iter().copied().fold(0.0, f64::max);
    let rejected = finals.iter().filter(|s| s.verdict == Verdict::Rejected).count();
    Ok(LatencyReport {
        max_poll_s,
        mean_poll_s: if times.is_empty() { 0.0 } else { total / times.len() as f64 },
        rtf: if audio_s > 0.0 { total / audio_s } else { 0.0 },
        segments: finals
            .iter()
            .filter(|s| s.verdict != Verdict::Rejected)
            .map(|s| ReportSegment {
                start_s: s.start,
                end_s: s.end,
                stage1: s.stage1_score,
                stage2: s.stage2_score,
            })
            .collect(),
        rejected,
        polls: times.len(),
        audio_s,
        buffer_s: cfg.buffer_seconds,
        poll_interval_s: cfg.poll_interval,
        violation: max_poll_s >= cfg.poll_interval,
    })
}

/// Reads a WAV file, converts it to the runtime rate and replays it.
pub fn run_file_realtime(runtime: &mut CascadeRuntime, wav: &Path, chunk_seconds: f64) -> Result<LatencyReport> {
    let clip = read_wav(wav)?;
    let clip = resample(&clip, runtime.buffer_config().sample_rate)?;
    run_samples(runtime, clip.samples(), chunk_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureMatrix, FeatureSource};
    use crate::stream::MfbProvider;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// One-layer, one-unit model whose score follows the first input with
    /// no memory: `tanh(gain · x0 + bias)`.
    fn follower(dims: usize, gain: f64, bias: f64) -> GruVadParams {
        let mut p = GruVadParams::zeros(dims, 1, 1);
        p.layers[0].w_h[0] = gain;
        p.layers[0].b_h[0] = bias;
        p.layers[0].b_z[0] = -60.0;
        p.w_out[0] = 3.0;
        p
    }

    /// Model that scores a constant.
    fn constant(dims: usize, value: f64) -> GruVadParams {
        let mut p = GruVadParams::zeros(dims, 1, 1);
        p.b_out = value.atanh();
        p
    }

    fn tone_bursts(seconds: f64, bursts: &[(f64, f64)]) -> Vec<f64> {
        let n = (seconds * 16000.0) as usize;
        (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                if bursts.iter().any(|&(a, b)| t >= a && t < b) {
                    0.3 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn runtime(stage1: GruVadParams, stage2: Option<(GruVadParams, Box<dyn FeatureProvider>)>, buffer: f64) -> CascadeRuntime {
        let buffer = BufferConfig {
            buffer_seconds: buffer,
            ..BufferConfig::default()
        };
        let (s2, prov) = match stage2 {
            Some((p, prov)) => (Some((p, Normalization::Instance)), Some(prov)),
            None => (None, None),
        };
        CascadeRuntime::new(buffer, CascadeConfig::default(), &MfbConfig::default(), stage1, s2, prov).unwrap()
    }

    /// Instance-normalized log-Mel band 0 (0–~30 Hz) of a 440 Hz burst is
    /// not informative; follow band 20 instead.
    fn band_follower() -> GruVadParams {
        let mut p = follower(80, 0.0, 0.0);
        p.layers[0].w_h[20] = 2.0;
        p
    }

    #[test]
    fn missing_provider_is_a_startup_error() {
        let r = CascadeRuntime::new(
            BufferConfig::default(),
            CascadeConfig::default(),
            &MfbConfig::default(),
            constant(80, -0.9),
            Some((constant(80, 0.5), Normalization::Instance)),
            None,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    struct CountingProvider(Arc<AtomicUsize>, MfbProvider);

    impl FeatureProvider for CountingProvider {
        fn features(&self, audio: &[f64], a: f64, b: f64) -> Result<FeatureMatrix> {
            self.0.fetch_add(1, Ordering::SeqCst);
            self.1.features(audio, a, b)
        }
        fn name(&self) -> &str {
            "counting"
        }
    }

    #[test]
    fn silence_never_reaches_stage2() {
        let calls = Arc::new(AtomicUsize::new(0));
        let prov = CountingProvider(calls.clone(), MfbProvider::new(&MfbConfig::default(), 16000).unwrap());
        let mut rt = runtime(constant(80, -0.99), Some((constant(80, 0.9), Box::new(prov))), 15.0);
        let report = run_samples(&mut rt, &vec![0.0; 16000 * 20], 0.5).unwrap();
        assert!(report.segments.is_empty());
        assert_eq!(calls.load(Ordering::SeqCst), 0);
        assert_eq!(rt.stage2_calls(), 0);
        assert_eq!(report.polls, 21);
    }

    #[test]
    fn empty_input_gives_empty_report() {
        let mut rt = runtime(constant(80, 0.9), None, 15.0);
        let r = run_samples(&mut rt, &[], 0.1).unwrap();
        assert_eq!((r.polls, r.segments.len(), r.max_poll_s), (0, 0, 0.0));
    }

    #[test]
    fn bursts_become_segments_and_stage2_decides() {
        let audio = tone_bursts(12.0, &[(2.0, 4.0), (7.0, 8.5)]);
        let mut rt = runtime(band_follower(), None, 5.0);
        let r = run_samples(&mut rt, &audio, 0.25).unwrap();
        assert_eq!(r.segments.len(), 2, "{r:?}");
        for (s, (a, b)) in r.segments.iter().zip([(2.0, 4.0), (7.0, 8.5)]) {
            assert!((s.start_s - a).abs() < 0.05 && (s.end_s - b).abs() < 0.05, "{s:?}");
            assert!(s.stage2.is_none());
        }
        let prov = MfbProvider::new(&MfbConfig::default(), 16000).unwrap();
        let mut rt = runtime(band_follower(), Some((constant(80, -0.5), Box::new(prov))), 5.0);
        let r = run_samples(&mut rt, &audio, 0.25).unwrap();
        assert!(r.segments.is_empty());
        assert_eq!(r.rejected, 2);
        assert_eq!(rt.stage2_calls(), 2);
    }

    #[test]
    fn chunking_does_not_change_decisions() {
        let audio = tone_bursts(9.0, &[(0.5, 1.7), (3.0, 3.2), (4.0, 8.9)]);
        let mut a = runtime(band_follower(), None, 3.0);
        let mut b = runtime(band_follower(), None, 3.0);
        let ra = run_samples(&mut a, &audio, 0.1).unwrap();
        let rb = run_samples(&mut b, &audio, 1.0).unwrap();
        assert_eq!(ra.decisions(), rb.decisions());
        assert_eq!(ra.polls, rb.polls);
    }

    #[test]
    fn emitted_segments_are_disjoint_and_ordered() {
        // speech longer than the buffer is cut into consecutive pieces
        let audio = tone_bursts(10.0, &[(1.0, 9.0)]);
        let mut rt = runtime(band_follower(), None, 3.0);
        let r = run_samples(&mut rt, &audio, 0.5).unwrap();
        assert!(r.segments.len() >= 2);
        assert!(r.segments.windows(2).all(|w| w[0].end_s <= w[1].start_s));
        assert!(r.segments.iter().all(|s| s.start_s < s.end_s));
        let covered: f64 = r.segments.iter().map(|s| s.end_s - s.start_s).sum();
        assert!((covered - 8.0).abs() < 0.1, "{covered}");
    }

    #[test]
    fn precomputed_provider_path() {
        let audio = tone_bursts(6.0, &[(1.0, 3.0)]);
        let f = FeatureMatrix::new(vec![1.0; 300], 300, 1, 0.02, FeatureSource::External).unwrap();
        let prov = crate::stream::PrecomputedProvider::new(f).unwrap();
        let buffer = BufferConfig::default();
        let mut rt = CascadeRuntime::new(
            buffer,
            CascadeConfig::default(),
            &MfbConfig::default(),
            band_follower(),
            Some((constant(1, 0.4), Normalization::None)),
            Some(Box::new(prov)),
        )
        .unwrap();
        let r = run_samples(&mut rt, &audio, 1.0).unwrap();
        assert_eq!(r.segments.len(), 1);
        assert!((r.segments[0].stage2.unwrap() - 0.4).abs() < 1e-12);
    }
}
