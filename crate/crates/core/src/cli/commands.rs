use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use vadforge::corpus::{
    load_utterances, read_manifest, speechlike::synthetic_corpus, synthesize_corpus, validate_manifest, NoiseBank,
    Partition,
};
use vadforge::dataset::{extract_manifest, load_partition};
use vadforge::features::{fit_stats, FeatureSource, Normalization};
use vadforge::gru::{load_params, save_params, train, GruVadConfig, GruVadParams, LossKind, TrainSequence};
use vadforge::metrics::{buffer_sweep, evaluate, write_results, Pooling, DEFAULT_FRACTIONS};
use vadforge::store;
use vadforge::stream::{run_file_realtime, CascadeRuntime, FeatureProvider, MfbProvider, PrecomputedProvider};
use vadforge::Error;

use super::{
    Cli, Command, EvalArgs, ExtractArgs, LossArg, ModelArgs, NormArg, RunConfig, StreamArgs, SweepArgs, SynthArgs,
    TrainArgs,
};

const MODEL_FILE: &str = "model.vgp";
const STATS_FILE: &str = "stats.vns";
const MODEL_INFO_FILE: &str = "model.json";

/// Effective settings of one invocation.
struct Ctx {
    config: RunConfig,
    seed: u64,
    threads: Option<usize>,
    started: Instant,
}

impl Ctx {
    /// Reproducibility record written next to the command's outputs.
    fn write_metadata(&self, path: &Path, command: &str, extra: serde_json::Value) -> Result<()> {
        let meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "argv": std::env::args().collect::<Vec<_>>(),
            "seed": self.seed,
            "threads": self.threads,
            "config": self.config,
            "wall_s": self.started.elapsed().as_secs_f64(),
            "details": extra,
        });
        write_json(path, &meta)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<u8> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let threads = cli.threads.or(config.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let ctx = Ctx {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        threads,
        config,
        started: Instant::now(),
    };
    match &cli.command {
        Command::Synth(a) => synth(ctx, a),
        Command::Extract(a) => extract(ctx, a),
        Command::Train(a) => train_cmd(ctx, a),
        Command::Eval(a) => eval(ctx, a),
        Command::Sweep(a) => sweep(ctx, a),
        Command::Stream(a) => stream(ctx, a),
        Command::Validate(a) => validate(ctx, &a.manifest),
    }
}

fn synth(mut ctx: Ctx, a: &SynthArgs) -> Result<u8> {
    let cfg = &mut ctx.config.synth;
    if let Some(t) = &a.noise_types {
        cfg.noise_types = t.clone();
    }
    if let Some(s) = &a.snrs {
        cfg.snrs = s.clone();
    }
    if a.no_clean {
        cfg.include_clean = false;
    }
    for (flag, slot) in [
        (a.train_seconds, &mut cfg.targets.train),
        (a.dev_seconds, &mut cfg.targets.dev),
        (a.test_seconds, &mut cfg.targets.test),
        (a.recording_seconds, &mut cfg.recording_duration),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    let cfg = cfg.clone();
    let sr = cfg.sample_rate;
    let utterances = match (&a.utterances, a.synthetic_speakers) {
        (Some(dir), _) => load_utterances(dir, sr)?,
        (None, Some(n)) => synthetic_corpus(n, a.synthetic_seconds, sr, ctx.seed),
        (None, None) => {
            return Err(Error::InvalidArgument("give --utterances DIR or --synthetic-speakers N".into()).into())
        }
    };
    log::info!("{} source utterances", utterances.len());
    let bank = NoiseBank::from_dir(a.noise_dir.as_deref(), &cfg.noise_types, sr, a.white_seconds, ctx.seed)?;
    let out = synthesize_corpus(utterances, &bank, &cfg, ctx.seed, &a.out)?;
    println!("wrote {} recordings to {}", out.entries.len(), a.out.display());
    ctx.write_metadata(
        &a.out.join("metadata.json"),
        "synth",
        json!({ "entries": out.entries.len(), "noise_slices": out.slices }),
    )?;
    Ok(0)
}

fn extract(mut ctx: Ctx, a: &ExtractArgs) -> Result<u8> {
    if let Some(n) = a.n_mels {
        ctx.config.features.n_mels = n;
    }
    let manifest = read_manifest(&a.manifest)?;
    let written = extract_manifest(&manifest, &a.out, &ctx.config.features)?;
    println!("wrote {} feature files to {}", written.len(), a.out.display());
    ctx.write_metadata(&a.out.join("metadata.json"), "extract", json!({ "files": written.len() }))?;
    Ok(0)
}

fn sequences(data: Vec<(vadforge::corpus::ManifestEntry, TrainSequence)>, norm: &Normalization) -> Result<Vec<TrainSequence>> {
    data.into_iter()
        .map(|(_, s)| Ok(TrainSequence::new(norm.apply(&s.features)?, s.labels)?))
        .collect()
}

fn train_cmd(mut ctx: Ctx, a: &TrainArgs) -> Result<u8> {
    let cfg = &mut ctx.config.train;
    if let Some(t) = &a.topology {
        (cfg.layers, cfg.hidden) = GruVadConfig::topology(t)?;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch = v;
    }
    if let Some(v) = a.bptt_chunk {
        cfg.bptt_chunk = v;
    }
    if let Some(l) = a.loss {
        cfg.loss = match l {
            LossArg::Mse => LossKind::Mse,
            LossArg::Bce => LossKind::Bce,
        };
    }
    cfg.seed = ctx.seed;
    let manifest = read_manifest(&a.manifest)?;
    let features = &ctx.config.features;
    let train_raw = load_partition(&manifest, Some(Partition::Train), &a.features, features)?;
    let dev_raw = load_partition(&manifest, Some(Partition::Dev), &a.features, features)?;
    if train_raw.is_empty() || dev_raw.is_empty() {
        return Err(Error::EmptyInput("manifest needs train and dev entries").into());
    }
    let dims = train_raw[0].1.features.dims();
    let source = train_raw[0].1.features.source();
    ctx.config.train.input_dim = dims;
    let norm = match a.normalization {
        NormArg::None => Normalization::None,
        NormArg::Instance => Normalization::Instance,
        NormArg::Global => Normalization::Global(fit_stats(train_raw.iter().map(|(_, s)| &s.features))?),
    };
    let train_set = sequences(train_raw, &norm)?;
    let dev_set = sequences(dev_raw, &norm)?;
    let (params, report) = train(&ctx.config.train, &train_set, &dev_set)?;

    save_params(&a.out.join(MODEL_FILE), &params)?;
    if let Normalization::Global(stats) = &norm {
        store::save_stats(stats, a.out.join(STATS_FILE))?;
    }
    write_json(
        &a.out.join(MODEL_INFO_FILE),
        &json!({
            "normalization": norm.name(),
            "source": source_name(source),
            "input_dim": dims,
            "layers": ctx.config.train.layers,
            "hidden": ctx.config.train.hidden,
        }),
    )?;
    write_json(&a.out.join("report.json"), &report)?;
    println!(
        "best epoch {} with dev AUC {:.4}; model in {}",
        report.best_epoch,
        report.best_dev_auc(),
        a.out.display()
    );
    ctx.write_metadata(&a.out.join("metadata.json"), "train", json!({ "normalization": norm.name() }))?;
    Ok(0)
}

fn source_name(s: FeatureSource) -> &'static str {
    match s {
        FeatureSource::Mfb => "mfb",
        FeatureSource::External => "external",
    }
}

/// A checkpoint plus the normalization it was trained with.
struct Model {
    params: GruVadParams,
    dir: Option<PathBuf>,
    normalization: Option<String>,
}

fn load_model(path: &Path) -> Result<Model> {
    if path.is_dir() {
        let info: Option<serde_json::Value> = std::fs::read_to_string(path.join(MODEL_INFO_FILE))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        Ok(Model {
            params: load_params(&path.join(MODEL_FILE))?,
            dir: Some(path.to_owned()),
            normalization: info.and_then(|v| v["normalization"].as_str().map(str::to_owned)),
        })
    } else {
        Ok(Model {
            params: load_params(path)?,
            dir: None,
            normalization: None,
        })
    }
}

fn resolve_norm(model: &Model, flag: Option<NormArg>, stats: Option<&Path>) -> Result<Normalization> {
    let kind = match flag {
        Some(k) => k,
        None => match model.normalization.as_deref() {
            Some("none") => NormArg::None,
            Some("global") => NormArg::Global,
            _ => NormArg::Instance,
        },
    };
    Ok(match kind {
        NormArg::None => Normalization::None,
        NormArg::Instance => Normalization::Instance,
        NormArg::Global => {
            let path = stats
                .map(Path::to_path_buf)
                .or_else(|| model.dir.as_ref().map(|d| d.join(STATS_FILE)))
                .ok_or_else(|| Error::InvalidArgument("global normalization needs --stats".into()))?;
            Normalization::Global(store::load_stats(path)?)
        }
    })
}

fn eval_data(ctx: &Ctx, a: &ModelArgs) -> Result<Vec<(vadforge::corpus::ManifestEntry, TrainSequence)>> {
    let manifest = read_manifest(&a.manifest)?;
    let data = load_partition(&manifest, Some(a.partition), &a.features, &ctx.config.features)?;
    if data.is_empty() {
        return Err(Error::EmptyInput("no manifest entries in the requested partition").into());
    }
    Ok(data)
}

fn representation(a: &ModelArgs, data: &[(vadforge::corpus::ManifestEntry, TrainSequence)], norm: &str) -> String {
    a.representation
        .clone()
        .unwrap_or_else(|| format!("{}-{norm}", source_name(data[0].1.features.source())))
}

fn pooling(a: &ModelArgs) -> Pooling {
    if a.per_recording {
        Pooling::PerRecording
    } else {
        Pooling::Frames
    }
}

fn eval(ctx: Ctx, a: &EvalArgs) -> Result<u8> {
    let model = load_model(&a.model.model)?;
    let norm = resolve_norm(&model, a.normalization, a.stats.as_deref())?;
    let data = eval_data(&ctx, &a.model)?;
    let rep = representation(&a.model, &data, norm.name());
    let table = evaluate(&model.params, &data, &rep, &norm, pooling(&a.model))?;
    for r in &table.rows {
        let snr = r.snr_db.map_or("-".to_string(), |s| format!("{s} dB"));
        println!("{:<10} {:>7}  AUC {:.4}", r.noise.name(), snr, r.auc);
    }
    println!("macro AUC {:.4}, pooled AUC {:.4}", table.macro_auc, table.pooled_auc);
    write_results(&a.model.out, &[(1.0, &table)], &table)?;
    ctx.write_metadata(
        &a.model.out.join("metadata.json"),
        "eval",
        json!({ "representation": rep, "normalization": norm.name() }),
    )?;
    Ok(0)
}

fn sweep(ctx: Ctx, a: &SweepArgs) -> Result<u8> {
    let model = load_model(&a.model.model)?;
    let data = eval_data(&ctx, &a.model)?;
    let fractions = a.fractions.clone().unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());
    let rep = representation(&a.model, &data, "instance");
    let result = buffer_sweep(&model.params, &data, &rep, &fractions, pooling(&a.model))?;
    for p in &result.points {
        println!(
            "fraction {:<5} ({:>5.1} s)  pooled AUC {:.4}",
            p.fraction, p.buffer_seconds, p.table.pooled_auc
        );
    }
    let tables: Vec<(f64, &_)> = result.points.iter().map(|p| (p.fraction, &p.table)).collect();
    write_results(&a.model.out, &tables, &result)?;
    ctx.write_metadata(&a.model.out.join("metadata.json"), "sweep", json!({ "representation": rep }))?;
    Ok(0)
}

fn stream(mut ctx: Ctx, a: &StreamArgs) -> Result<u8> {
    if let Some(b) = a.buffer {
        ctx.config.buffer.buffer_seconds = b;
    }
    if let Some(p) = a.poll {
        ctx.config.buffer.poll_interval = p;
    }
    let stage1 = load_model(&a.stage1)?.params;
    let stage2 = a
        .stage2
        .as_deref()
        .map(|p| -> Result<_> {
            let norm = match a.stage2_normalization {
                NormArg::None => Normalization::None,
                NormArg::Instance => Normalization::Instance,
                NormArg::Global => {
                    return Err(Error::Config("stage 2 supports none or instance normalization".into()).into())
                }
            };
            Ok((load_model(p)?.params, norm))
        })
        .transpose()?;
    let provider: Option<Box<dyn FeatureProvider>> = match a.stage2_features.as_deref() {
        None => None,
        Some("mfb") => Some(Box::new(MfbProvider::new(&ctx.config.features, ctx.config.buffer.sample_rate)?)),
        Some(dir) => {
            let stem = a.wav.file_stem().unwrap_or_default().to_string_lossy();
            let f = store::load(Path::new(dir).join(format!("{stem}.vfe")))?;
            Some(Box::new(PrecomputedProvider::new(f)?))
        }
    };
    let mut runtime = CascadeRuntime::new(
        ctx.config.buffer.clone(),
        ctx.config.cascade.clone(),
        &ctx.config.features,
        stage1,
        stage2,
        provider,
    )?;
    let report = run_file_realtime(&mut runtime, &a.wav, a.chunk)?;
    write_json(&a.report, &report)?;
    println!(
        "{} segments, {} polls, max poll {:.3} s, mean {:.3} s, RTF {:.4}",
        report.segments.len(),
        report.polls,
        report.max_poll_s,
        report.mean_poll_s,
        report.rtf
    );
    ctx.write_metadata(
        &a.report.with_extension("metadata.json"),
        "stream",
        json!({ "stage2_calls": runtime.stage2_calls() }),
    )?;
    if report.violation {
        eprintln!(
            "real-time violation: a poll took {:.3} s with a {} s poll interval",
            report.max_poll_s, ctx.config.buffer.poll_interval
        );
        return Ok(3);
    }
    Ok(0)
}

fn validate(ctx: Ctx, path: &Path) -> Result<u8> {
    let manifest = read_manifest(path)?;
    let report = validate_manifest(&manifest)?;
    println!("{} entries OK", report.entries);
    for (p, n) in &report.per_partition {
        println!("  {p}: {n}");
    }
    ctx.write_metadata(
        &manifest.root.join("validate.metadata.json"),
        "validate",
        json!({ "entries": report.entries, "per_partition": report.per_partition }),
    )?;
    Ok(0)
}
