//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.

use super::AudioClip;
use crate::error::{Error, Result};

const TAPS: usize = 64;
const HALF: f64 = (TAPS / 2) as f64;
const KAISER_BETA: f64 = 8.6;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Polyphase filter bank for one `(from, to)` rate pair. One 64-tap branch
/// per output phase; each branch is normalized to unit DC gain.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: u64,
    down: u64,
    target_rate: u32,
    phases: Vec<[f64; TAPS]>,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Result<Self> {
        if source_rate == 0 || target_rate == 0 {
            return Err(Error::InvalidArgument("sample rates must be positive".into()));
        }
        let g = gcd(source_rate as u64, target_rate as u64);
        let up = target_rate as u64 / g;
        let down = source_rate as u64 / g;
        // cutoff relative to the input Nyquist; below 1 only when decimating
        let cutoff = (up as f64 / down as f64).min(1.0);
        let i0_beta = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps = [0.0; TAPS];
                for (k, tap) in taps.iter_mut().enumerate() {
                    let t = k as f64 - (HALF - 1.0) - frac;
                    let r = t / HALF;
                    let w = if r.abs() <= 1.0 {
                        bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
                    } else {
                        0.0
                    };
                    *tap = cutoff * sinc(cutoff * t) * w;
                }
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Ok(Self {
            up,
            down,
            target_rate,
            phases,
        })
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        ((input_len as u64 * self.up).div_ceil(self.down)) as usize
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(input.len());
        let offset = HALF as i64 - 1;
        (0..n_out as u64)
            .map(|n| {
                let pos = n * self.down;
                let base = (pos / self.up) as i64;
                let taps = &self.phases[(pos % self.up) as usize];
                let first = base - offset;
                taps.iter()
                    .enumerate()
                    .filter_map(|(k, &h)| {
                        let idx = first + k as i64;
                        (idx >= 0 && (idx as usize) < input.len()).then(|| input[idx as usize] * h)
                    })
                    .sum()
            })
            .collect()
    }

    pub fn target_rate(&self) -> u32 {
        self.target_rate
    }
}

/// Resamples `clip` to `target_rate`. Same rate in returns the clip unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    if clip.sample_rate() == target_rate {
        return Ok(clip.clone());
    }
    let resampler = Resampler::new(clip.sample_rate(), target_rate)?;
    AudioClip::new(resampler.process(clip.samples()), target_rate)
}
