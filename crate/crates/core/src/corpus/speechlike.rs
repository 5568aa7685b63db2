//! Deterministic speech-like utterances for desk-scale experiments when no
//! recorded corpus is at hand.
//!
//! Each synthetic speaker has a fundamental frequency, a vocal-tract scale and
//! a speaking rate. An utterance is a run of syllables: a harmonic source
//! shaped by three vowel formants under a syllabic amplitude envelope, with an
//! occasional fricative onset. Syllable boundaries dip in level but never
//! reach silence, as in connected speech.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Utterance;
use crate::audio::{rms_of, AudioClip};
use crate::seed::rng_for;

/// F1, F2, F3 of a handful of vowels, Hz.
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [440.0, 1020.0, 2240.0],
];
const BANDWIDTHS: [f64; 3] = [90.0, 120.0, 170.0];
const MAX_HARMONIC_HZ: f64 = 3800.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub id: String,
    pub f0: f64,
    pub formant_scale: f64,
    pub syllables_per_second: f64,
}

impl SpeakerProfile {
    pub fn random(id: String, rng: &mut ChaCha8Rng) -> Self {
        Self {
            id,
            f0: rng.random_range(85.0..250.0),
            formant_scale: rng.random_range(0.85..1.2),
            syllables_per_second: rng.random_range(3.5..6.0),
        }
    }
}

fn formant_gain(f: f64, formants: &[f64; 3]) -> f64 {
    formants
        .iter()
        .zip(BANDWIDTHS)
        .map(|(&fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)))
        .sum::<f64>()
        * (1.0 + f / 1000.0).recip()
}

/// Peak ceiling leaving headroom for noise added at low SNR.
const PEAK_LIMIT: f64 = 0.6;

/// One utterance of roughly `seconds` duration at RMS level `level`, or
/// quieter if that level would push peaks past 0.6.
pub fn utterance(speaker: &SpeakerProfile, seconds: f64, level: f64, sample_rate: u32, rng: &mut ChaCha8Rng) -> AudioClip {
    let sr = sample_rate as f64;
    let mut out: Vec<f64> = Vec::with_capacity((seconds * sr) as usize + 1);
    let mut phases = vec![0.0f64; (MAX_HARMONIC_HZ / 60.0) as usize + 1];
    let total = (seconds * sr) as usize;
    while out.len() < total {
        let syl_len = ((rng.random_range(0.7..1.3) / speaker.syllables_per_second) * sr) as usize;
        let vowel = VOWELS[rng.random_range(0..VOWELS.len())].map(|f| f * speaker.formant_scale);
        let f0_start = speaker.f0 * rng.random_range(0.9..1.12);
        let f0_end = f0_start * rng.random_range(0.85..1.05);
        let fricative = if rng.random_bool(0.3) {
            (rng.random_range(0.03..0.07) * sr) as usize
        } else {
            0
        };
        let mut prev_noise = 0.0;
        for i in 0..syl_len {
            let pos = i as f64 / syl_len as f64;
            // raised-sine envelope with a floor so syllable joints stay voiced
            let env = 0.25 + 0.75 * (PI * pos).sin().powf(0.7);
            let f0 = f0_start + (f0_end - f0_start) * pos;
            let mut v = 0.0;
            for (h, phase) in phases.iter_mut().enumerate() {
                let f = f0 * (h + 1) as f64;
                if f > MAX_HARMONIC_HZ {
                    break;
                }
                *phase = (*phase + 2.0 * PI * f / sr) % (2.0 * PI);
                v += formant_gain(f, &vowel) * phase.sin();
            }
            let mut s = env * v;
            if i < fricative {
                let w: f64 = StandardNormal.sample(rng);
                // first difference tilts the noise towards high frequencies
                s += 0.8 * (w - prev_noise);
                prev_noise = w;
            }
            out.push(s);
        }
    }
    out.truncate(total.max(1));
    let r = rms_of(&out).unwrap_or(1.0);
    let peak = out.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if r > 0.0 {
        let gain = (level / r).min(PEAK_LIMIT / peak);
        out.iter_mut().for_each(|s| *s *= gain);
    }
    AudioClip::new(out, sample_rate).expect("finite synthesis")
}

/// `n_speakers` synthetic speakers with about `seconds_per_speaker` of
/// utterances each (1.5 to 4.5 s long, RMS 0.05 to 0.15).
pub fn synthetic_corpus(n_speakers: usize, seconds_per_speaker: f64, sample_rate: u32, seed: u64) -> Vec<Utterance> {
    let mut utterances = Vec::new();
    for s in 0..n_speakers {
        let mut rng = rng_for(seed, &[0x5350_4b, s as u64]);
        let speaker = SpeakerProfile::random(format!("spk{s:03}"), &mut rng);
        let mut have = 0.0;
        let mut k = 0;
        while have < seconds_per_speaker {
            let secs = rng.random_range(1.5..4.5);
            let level = rng.random_range(0.05..0.15);
            let clip = utterance(&speaker, secs, level, sample_rate, &mut rng);
            have += clip.duration();
            utterances.push(Utterance {
                id: format!("{}/utt{k:04}", speaker.id),
                speaker: speaker.id.clone(),
                clip,
            });
            k += 1;
        }
    }
    utterances
}
