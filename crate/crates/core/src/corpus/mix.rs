use rand::Rng;

use crate::audio::{rms_of, AudioClip};
use crate::error::{Error, Result};

/// Details of one mix, kept for bookkeeping and SNR verification.
#[derive(Debug, Clone)]
pub struct MixOutcome {
    pub mixed: AudioClip,
    /// Offset of the noise slice within the noise clip, samples.
    pub noise_offset: usize,
    /// Gain applied to the noise slice.
    pub noise_gain: f64,
    pub speech_rms: f64,
    pub scaled_noise_rms: f64,
}

/// `20 log10(rms(speech) / rms(noise))`.
pub fn measured_snr_db(speech: &[f64], noise: &[f64]) -> Result<f64> {
    Ok(20.0 * (rms_of(speech)? / rms_of(noise)?).log10())
}

/// Adds a random contiguous slice of `noise` to `speech`, scaled so that the
/// noise RMS equals `rms(speech) * 10^(-snr_db / 20)`. The sum is not
/// renormalized and may leave `[-1, +1]`.
pub fn mix_noise_detailed<R: Rng + ?Sized>(
    speech: &AudioClip,
    noise: &AudioClip,
    snr_db: f64,
    rng: &mut R,
) -> Result<MixOutcome> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("snr must be finite, got {snr_db}")));
    }
    if speech.sample_rate() != noise.sample_rate() {
        return Err(Error::RateMismatch {
            expected: speech.sample_rate(),
            found: noise.sample_rate(),
        });
    }
    if noise.len() < speech.len() {
        return Err(Error::InsufficientNoise {
            needed: speech.len(),
            available: noise.len(),
        });
    }
    let speech_rms = rms_of(speech.samples())?;
    if speech_rms == 0.0 {
        return Err(Error::DegenerateInput("speech is silent (rms 0)"));
    }
    let offset = rng.random_range(0..=noise.len() - speech.len());
    let slice = &noise.samples()[offset..offset + speech.len()];
    let noise_rms = rms_of(slice)?;
    if noise_rms == 0.0 {
        return Err(Error::DegenerateInput("selected noise slice is silent (rms 0)"));
    }
    let target = speech_rms * 10f64.powf(-snr_db / 20.0);
    let gain = target / noise_rms;
    let mixed = speech
        .samples()
        .iter()
        .zip(slice)
        .map(|(s, n)| s + gain * n)
        .collect();
    Ok(MixOutcome {
        mixed: AudioClip::new(mixed, speech.sample_rate())?,
        noise_offset: offset,
        noise_gain: gain,
        speech_rms,
        scaled_noise_rms: target,
    })
}

pub fn mix_noise<R: Rng + ?Sized>(speech: &AudioClip, noise: &AudioClip, snr_db: f64, rng: &mut R) -> Result<AudioClip> {
    mix_noise_detailed(speech, noise, snr_db, rng).map(|m| m.mixed)
}
