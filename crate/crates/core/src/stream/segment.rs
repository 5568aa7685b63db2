use super::CascadeConfig;

/// Frame span `[start, end)` found by the hysteresis automaton. `open`
/// segments were still in speech when the scores ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
    pub open: bool,
}

/// Hysteresis segmentation: speech starts at the first frame scoring
/// `>= onset` and ends at the first frame of a run of `< offset` frames
/// lasting at least `hangover`. Spans shorter than `min_segment` are dropped,
/// open ones included.
pub fn segment_scores(scores: &[f64], hop_s: f64, config: &CascadeConfig) -> Vec<FrameSpan> {
    let hang = ((config.hangover / hop_s) - 1e-9).ceil().max(1.0) as usize;
    let min_frames = (config.min_segment / hop_s - 1e-9).ceil().max(1.0) as usize;
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut run = 0usize;
    for (t, &s) in scores.iter().enumerate() {
        match start {
            None => {
                if s >= config.onset_threshold {
                    start = Some(t);
                    run = 0;
                }
            }
            Some(a) => {
                if s < config.offset_threshold {
                    run += 1;
                    if run >= hang {
                        spans.push(FrameSpan {
                            start: a,
                            end: t + 1 - run,
                            open: false,
                        });
                        start = None;
                    }
                } else {
                    run = 0;
                }
            }
        }
    }
    if let Some(a) = start {
        spans.push(FrameSpan {
            start: a,
            end: scores.len() - run,
            open: true,
        });
    }
    spans.retain(|s| s.end - s.start >= min_frames);
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(onset: f64, offset: f64, hangover: f64, min_segment: f64) -> CascadeConfig {
        CascadeConfig {
            onset_threshold: onset,
            offset_threshold: offset,
            hangover,
            min_segment,
            ..CascadeConfig::default()
        }
    }

    #[test]
    fn step_function_gives_one_segment() {
        let mut s = vec![-1.0; 300];
        s.extend(vec![1.0; 200]);
        s.extend(vec![-1.0; 300]);
        let spans = segment_scores(&s, 0.01, &cfg(0.0, 0.0, 0.2, 1.0));
        assert_eq!(spans, vec![FrameSpan { start: 300, end: 500, open: false }]);
    }

    #[test]
    fn isolated_spike_is_discarded() {
        let mut s = vec![-1.0; 100];
        s[50] = 0.9;
        assert!(segment_scores(&s, 0.01, &CascadeConfig::default()).is_empty());
    }

    #[test]
    fn short_dips_are_bridged() {
        // a 10-frame dip is shorter than the 20-frame hangover
        let mut s = vec![1.0; 100];
        s[40..50].fill(-1.0);
        s.extend(vec![-1.0; 50]);
        let spans = segment_scores(&s, 0.01, &CascadeConfig::default());
        assert_eq!(spans, vec![FrameSpan { start: 0, end: 100, open: false }]);
    }

    #[test]
    fn hysteresis_band_keeps_speech() {
        // scores between offset and onset neither start nor end speech
        let mut s = vec![-0.1; 20];
        s.extend(vec![0.5; 40]);
        s.extend(vec![-0.1; 40]);
        let spans = segment_scores(&s, 0.01, &CascadeConfig::default());
        assert_eq!(spans, vec![FrameSpan { start: 20, end: 100, open: true }]);
    }

    #[test]
    fn open_segment_ends_before_pending_run() {
        let mut s = vec![1.0; 50];
        s.extend(vec![-1.0; 5]);
        let spans = segment_scores(&s, 0.01, &CascadeConfig::default());
        assert_eq!(spans, vec![FrameSpan { start: 0, end: 50, open: true }]);
    }
}
