use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureSource};
use crate::audio::AudioClip;
use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-10;

/// HTK mel scale.
pub fn mel_scale(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfbConfig {
    pub n_mels: usize,
    /// Analysis window, seconds.
    pub win: f64,
    /// Frame shift, seconds.
    pub hop: f64,
    pub fmin: f64,
    /// `None` means the Nyquist frequency of the input.
    pub fmax: Option<f64>,
    pub fft_size: usize,
    /// Declared mel convention, echoed into run metadata.
    pub mel_convention: String,
}

impl Default for MfbConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            win: 0.025,
            hop: 0.010,
            fmin: 0.0,
            fmax: None,
            fft_size: 512,
            mel_convention: "htk".to_string(),
        }
    }
}

impl MfbConfig {
    pub fn win_samples(&self, sample_rate: u32) -> usize {
        (self.win * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop * sample_rate as f64).round() as usize
    }

    pub fn fmax_for(&self, sample_rate: u32) -> f64 {
        self.fmax.unwrap_or(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        let fmax = self.fmax_for(sample_rate);
        if self.n_mels == 0 {
            return Err(Error::InvalidArgument("n_mels must be positive".into()));
        }
        if !(0.0 <= self.fmin && self.fmin < fmax && fmax <= nyquist) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin {} fmax {fmax}",
                self.fmin
            )));
        }
        let win = self.win_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        if win == 0 || hop == 0 {
            return Err(Error::InvalidArgument("window and hop must span at least one sample".into()));
        }
        if self.fft_size < win {
            return Err(Error::InvalidArgument(format!(
                "fft_size {} shorter than the {win}-sample window",
                self.fft_size
            )));
        }
        Ok(())
    }
}

/// Number of full analysis windows in `n_samples`. Partial trailing windows
/// are dropped.
pub fn frame_count(n_samples: usize, config: &MfbConfig, sample_rate: u32) -> usize {
    let win = config.win_samples(sample_rate);
    let hop = config.hop_samples(sample_rate).max(1);
    if n_samples < win || win == 0 {
        0
    } else {
        (n_samples - win) / hop + 1
    }
}

/// Triangular filters on the power spectrum, one sparse row per band.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_bins: usize,
    rows: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Self {
        let n_bins = fft_size / 2 + 1;
        let (lo, hi) = (mel_scale(fmin), mel_scale(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let rows = edges
            .windows(3)
            .map(|e| {
                let (left, center, right) = (e[0], e[1], e[2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > left && f <= center {
                            (f - left) / (center - left)
                        } else if f > center && f < right {
                            (right - f) / (right - center)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                match weights.first() {
                    Some(&(start, _)) => (start, weights.into_iter().map(|(_, w)| w).collect()),
                    None => (0, Vec::new()),
                }
            })
            .collect();
        Self {
            n_bins,
            rows,
            centers_hz: edges[1..=n_mels].to_vec(),
        }
    }

    pub fn n_mels(&self) -> usize {
        self.rows.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Dense copy of band `m`.
    pub fn dense_row(&self, m: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n_bins];
        let (start, w) = &self.rows[m];
        row[*start..start + w.len()].copy_from_slice(w);
        row
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (o, (start, w)) in out.iter_mut().zip(&self.rows) {
            *o = w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum();
        }
    }
}

/// Reusable extractor: FFT plan, window and filterbank for one sample rate.
pub struct MfbExtractor {
    config: MfbConfig,
    sample_rate: u32,
    win: usize,
    hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
}

impl MfbExtractor {
    pub fn new(config: &MfbConfig, sample_rate: u32) -> Result<Self> {
        config.validate(sample_rate)?;
        let win = config.win_samples(sample_rate);
        let window = (0..win)
            .map(|n| {
                if win == 1 {
                    1.0
                } else {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (win - 1) as f64).cos()
                }
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(config.fft_size);
        let filterbank = MelFilterbank::new(
            config.n_mels,
            config.fft_size,
            sample_rate,
            config.fmin,
            config.fmax_for(sample_rate),
        );
        Ok(Self {
            config: config.clone(),
            sample_rate,
            win,
            hop: config.hop_samples(sample_rate),
            window,
            fft,
            filterbank,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn config(&self) -> &MfbConfig {
        &self.config
    }

    /// Log-Mel energies for raw samples at the extractor's rate.
    pub fn extract_samples(&self, samples: &[f64]) -> FeatureMatrix {
        let n_frames = frame_count(samples.len(), &self.config, self.sample_rate);
        let n_mels = self.config.n_mels;
        let n_fft = self.config.fft_size;
        let mut values = vec![0.0; n_frames * n_mels];
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; self.filterbank.n_bins()];
        for (t, out) in values.chunks_exact_mut(n_mels.max(1)).enumerate().take(n_frames) {
            let frame = &samples[t * self.hop..t * self.hop + self.win];
            for (b, (s, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                *b = Complex::new(s * w, 0.0);
            }
            buf[self.win..].fill(Complex::new(0.0, 0.0));
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            self.filterbank.apply(&power, out);
            for v in out.iter_mut() {
                *v = v.max(LOG_FLOOR).ln();
            }
        }
        FeatureMatrix {
            values,
            frames: n_frames,
            dims: n_mels,
            hop: self.hop as f64 / self.sample_rate as f64,
            source: FeatureSource::Mfb,
        }
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        if clip.sample_rate() != self.sample_rate {
            return Err(Error::RateMismatch {
                expected: self.sample_rate,
                found: clip.sample_rate(),
            });
        }
        Ok(self.extract_samples(clip.samples()))
    }
}

/// Hann window, power spectrum, triangular mel filterbank, natural log with
/// a 1e-10 floor. One row per full window.
pub fn extract_mfb(clip: &AudioClip, config: &MfbConfig) -> Result<FeatureMatrix> {
    MfbExtractor::new(config, clip.sample_rate())?.extract(clip)
}
