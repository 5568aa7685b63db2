//! Labeled corpus synthesis: utterances are concatenated with Gaussian pauses,
//! degraded with typed noise at a target SNR, and written out with span
//! labels and a JSON-lines manifest.

mod labels;
mod manifest;
mod mix;
mod noise;
mod pause;
pub mod speechlike;
mod synth;

pub use labels::{frame_labels, span_labels, LabeledRecording, SpeechSpan};
pub use manifest::{
    read_labels, read_manifest, validate_manifest, write_labels, write_manifest, LabelSidecar, Manifest,
    ManifestEntry, ValidationReport,
};
pub use mix::{measured_snr_db, mix_noise, mix_noise_detailed, MixOutcome};
pub use noise::{white_noise, NoiseBank, NoiseSlice, NoiseStream, NoiseType};
pub use pause::{sample_pause, PauseModel};
pub use synth::{
    concatenate, concatenate_with_pauses, load_utterances, split_by_speaker, synthesize_corpus,
    synthesize_partition, PartitionOutput, PartitionTargets, SynthConfig, Utterance,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Dev, Partition::Test];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for Partition {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            other => Err(crate::Error::InvalidArgument(format!("unknown partition {other:?}"))),
        }
    }
}
