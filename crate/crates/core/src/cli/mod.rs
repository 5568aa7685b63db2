mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vadforge::corpus::{NoiseType, Partition};
use vadforge::Error;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "vadforge", version, about = "Voice activity detection toolkit")]
pub struct Cli {
    /// TOML file with [synth], [features], [train], [buffer] and [cascade] sections.
    #[arg(long, global = true, help_heading = "Global options")]
    pub config: Option<PathBuf>,
    /// Root seed for every random choice.
    #[arg(long, global = true, help_heading = "Global options")]
    pub seed: Option<u64>,
    /// Worker threads (1 for strictly sequential execution).
    #[arg(long, global = true, help_heading = "Global options")]
    pub threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true, help_heading = "Global options")]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true, help_heading = "Global options")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a labelled noisy corpus and its manifest.
    Synth(SynthArgs),
    /// Compute log-Mel features for every manifest entry.
    Extract(ExtractArgs),
    /// Train a GRU VAD.
    Train(TrainArgs),
    /// AUC per noise condition.
    Eval(EvalArgs),
    /// AUC as a function of buffer size.
    Sweep(SweepArgs),
    /// Replay a WAV file through the streaming cascade.
    Stream(StreamArgs),
    /// Check a manifest and the files it references.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for audio, labels and manifest.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of speech WAVs, one subdirectory per speaker.
    #[arg(long, conflicts_with = "synthetic_speakers")]
    pub utterances: Option<PathBuf>,
    /// Generate speech-like utterances for this many speakers instead.
    #[arg(long)]
    pub synthetic_speakers: Option<usize>,
    /// Seconds of generated speech per speaker.
    #[arg(long, default_value_t = 40.0)]
    pub synthetic_seconds: f64,
    /// Noise material laid out as `<dir>/<type>/*.wav`.
    #[arg(long)]
    pub noise_dir: Option<PathBuf>,
    /// Seconds of white noise generated per partition.
    #[arg(long, default_value_t = 300.0)]
    pub white_seconds: f64,
    /// Comma-separated noise types to mix in.
    #[arg(long, value_delimiter = ',')]
    pub noise_types: Option<Vec<NoiseType>>,
    /// Comma-separated SNRs in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snrs: Option<Vec<f64>>,
    /// Leave out the clean copy of each recording.
    #[arg(long)]
    pub no_clean: bool,
    /// Seconds of audio per condition in the train partition.
    #[arg(long)]
    pub train_seconds: Option<f64>,
    /// Seconds of audio per condition in the dev partition.
    #[arg(long)]
    pub dev_seconds: Option<f64>,
    /// Seconds of audio per condition in the test partition.
    #[arg(long)]
    pub test_seconds: Option<f64>,
    /// Target length of each recording in seconds.
    #[arg(long)]
    pub recording_seconds: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for `.vfe` feature files.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of Mel bands.
    #[arg(long)]
    pub n_mels: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum NormArg {
    None,
    Global,
    Instance,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of extracted `.vfe` features.
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory for the checkpoint and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// `<layers>L<hidden>N`, e.g. 1L64N.
    #[arg(long)]
    pub topology: Option<String>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Number of passes over the train partition.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Recordings per batch.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Frames per truncated-BPTT chunk.
    #[arg(long)]
    pub bptt_chunk: Option<usize>,
    /// Training loss.
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Feature normalization applied before the network.
    #[arg(long, value_enum, default_value = "global")]
    pub normalization: NormArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum LossArg {
    Mse,
    Bce,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of extracted `.vfe` features.
    #[arg(long)]
    pub features: PathBuf,
    /// Training output directory, or a bare `.vgp` checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for results.json and results.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Partition to score.
    #[arg(long, default_value = "test")]
    pub partition: Partition,
    /// Label for the results (defaults to `<source>-<normalization>`).
    #[arg(long)]
    pub representation: Option<String>,
    /// Average per-recording AUCs instead of pooling frames.
    #[arg(long)]
    pub per_recording: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Overrides the normalization recorded with the model.
    #[arg(long, value_enum)]
    pub normalization: Option<NormArg>,
    /// Statistics for global normalization (defaults to the model's).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated buffer sizes as fractions of each recording.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Input recording.
    #[arg(long)]
    pub wav: PathBuf,
    /// Where to write the JSON segment and latency report.
    #[arg(long)]
    pub report: PathBuf,
    /// Stage-1 checkpoint (or training directory).
    #[arg(long)]
    pub stage1: PathBuf,
    /// Stage-2 checkpoint (or training directory); omit for stage 1 only.
    #[arg(long)]
    pub stage2: Option<PathBuf>,
    /// `mfb`, or a directory holding `<wav stem>.vfe`.
    #[arg(long)]
    pub stage2_features: Option<String>,
    /// Normalization of stage-2 features.
    #[arg(long, value_enum, default_value = "instance")]
    pub stage2_normalization: NormArg,
    /// Buffer length in seconds.
    #[arg(long)]
    pub buffer: Option<f64>,
    /// Poll interval in seconds.
    #[arg(long)]
    pub poll: Option<f64>,
    /// Push granularity in seconds.
    #[arg(long, default_value_t = 0.1)]
    pub chunk: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Corpus manifest (JSON lines).
    pub manifest: PathBuf,
}

/// Process exit status for an error.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Divergence { .. }) => 3,
        Some(Error::Config(_) | Error::InvalidArgument(_)) => 1,
        _ => 2,
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
