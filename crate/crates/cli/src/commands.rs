use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use kws_core::audio::{decode_external, load_wav, save_wav, AudioClip, SampleFormat, DEFAULT_FRAME_LEN, PIPELINE_RATE};
use kws_core::corpus::{
    ingest_audio, make_label_map, read_corpus_csv, read_manifest_csv, split_manifest, synth_dataset, synth_stream,
    write_corpus_csv, write_manifest_csv, Split, SplitMode, SynthSpec,
};
use kws_core::detector::{detect, events_csv, frequency_report, read_events_csv, DetectionEvent, SpotConfig};
use kws_core::fsutil::write_atomic;
use kws_core::model::{build_dense_baseline, build_kws_cnn, load_checkpoint, save_checkpoint, TrainingMetadata};
use kws_core::training::{evaluate, load_dataset, train as fit, Precision, TrainConfig};
use kws_core::{Architecture, LabelMap, ModelGraph, UtteranceRecord};

use crate::config::{parse_list, parse_ratios, PipelineConfig};
use crate::{DetectorArgs, EvalArgs, IngestArgs, ReportArgs, SpotArgs, SynthArgs, TrainArgs, UsageError};

pub struct Context {
    pub config: PipelineConfig,
    pub seed: u64,
    pub out: PathBuf,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn parsed<T: std::str::FromStr<Err = String>>(value: Option<String>, what: &str) -> Result<Option<T>> {
    value
        .map(|v| v.parse::<T>().map_err(|e| UsageError(format!("{what}: {e}")).into()))
        .transpose()
}

pub fn ingest(ctx: &Context, args: IngestArgs) -> Result<()> {
    let cfg = &ctx.config;
    let audio_dir = cfg.require_path(args.audio_dir, "audio_dir")?;
    let corpus_paths = if args.corpus.is_empty() {
        vec![cfg.require_path(None, "corpus")?]
    } else {
        args.corpus
    };
    let refs: Vec<&Path> = corpus_paths.iter().map(PathBuf::as_path).collect();
    let agg = read_corpus_csv(&refs)?;
    for c in &agg.conflicts {
        eprintln!(
            "warning: `{}` category conflict, kept {} over {}",
            c.keyword, c.kept, c.discarded
        );
    }
    for r in &agg.rejected {
        eprintln!(
            "warning: corpus source {} row {} skipped: {}",
            r.source + 1,
            r.row,
            r.reason
        );
    }
    let decoder = args.decoder_cmd.or_else(|| cfg.raw("decoder_cmd").map(String::from));
    let scan = ingest_audio(&audio_dir, &agg.corpus, &ctx.out, decoder.as_deref())?;
    for e in &scan.excluded {
        eprintln!("warning: skipped {}: {}", e.path, e.reason);
    }
    println!(
        "ingested {} utterances into {} ({} skipped)",
        scan.records.len(),
        ctx.out.join("manifest.csv").display(),
        scan.excluded.len()
    );
    Ok(())
}

fn parse_plant(s: &str) -> Result<(usize, f64), UsageError> {
    let bad = || UsageError(format!("plant `{s}` must look like CLASS@SECONDS"));
    let (c, t) = s.split_once('@').ok_or_else(bad)?;
    Ok((
        c.trim().parse().map_err(|_| bad())?,
        t.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn synth(ctx: &Context, args: SynthArgs) -> Result<()> {
    let cfg = &ctx.config;
    let defaults = SynthSpec::default();
    let snr_db = if args.clean {
        None
    } else {
        Some(
            cfg.pick(args.snr_db, "snr_db")?
                .unwrap_or(defaults.snr_db.unwrap_or(20.0)),
        )
    };
    let spec = SynthSpec {
        classes: cfg.pick(args.classes, "classes")?.unwrap_or(defaults.classes),
        per_class: cfg.pick(args.per_class, "per_class")?.unwrap_or(defaults.per_class),
        frame_len: cfg.get("frame_len")?.unwrap_or(defaults.frame_len),
        snr_db,
        speakers: cfg.pick(args.speakers, "speakers")?.unwrap_or(defaults.speakers),
        background: args.background || cfg.get("background")?.unwrap_or(false),
    };
    let records = synth_dataset(&spec, ctx.seed, &ctx.out)?;
    write_corpus_csv(&ctx.out.join("keywords.csv"), &spec.corpus())?;
    println!("wrote {} synthetic utterances to {}", records.len(), ctx.out.display());

    if let Some(secs) = args.stream_secs {
        let plants = args
            .plant
            .iter()
            .map(|p| parse_plant(p))
            .collect::<Result<Vec<_>, _>>()?;
        let (clip, truth) = synth_stream(&spec, secs, &plants, ctx.seed.wrapping_add(1))?;
        save_wav(&ctx.out.join("stream.wav"), &clip, SampleFormat::Pcm16)?;
        let mut csv = String::from("keyword,start_s\n");
        for t in &truth {
            csv.push_str(&format!("{},{}\n", t.keyword, t.start_s));
        }
        write(&ctx.out.join("planted.csv"), csv.as_bytes())?;
        println!("wrote {secs} s stream with {} planted bursts", truth.len());
    }
    Ok(())
}

/// Manifest rows with their paths made absolute against the manifest's directory.
fn read_records(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let records = read_manifest_csv(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let base = std::fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
    Ok(records
        .into_iter()
        .map(|mut r| {
            r.path = base.join(&r.path).to_string_lossy().into_owned();
            r
        })
        .collect())
}

fn label_map_for(cfg: &PipelineConfig, args: &TrainArgs, records: &[UtteranceRecord]) -> Result<LabelMap> {
    let selected = args.keywords.clone().or_else(|| cfg.raw("keywords").map(String::from));
    match selected.map(|s| parse_list(&s)) {
        Some(list) => match cfg.path(args.corpus.clone(), "corpus") {
            Some(corpus) => {
                let agg = read_corpus_csv(&[corpus.as_path()])?;
                let refs: Vec<&str> = list.iter().map(String::as_str).collect();
                Ok(make_label_map(&agg.corpus, &refs)?)
            }
            None => Ok(LabelMap::new(list)?),
        },
        None => {
            let mut kws: Vec<String> = records.iter().map(|r| r.keyword.clone()).collect();
            kws.sort();
            kws.dedup();
            Ok(LabelMap::new(kws)?)
        }
    }
}

fn train_config(ctx: &Context, args: &TrainArgs) -> Result<TrainConfig> {
    let cfg = &ctx.config;
    let d = TrainConfig::default();
    let precision = parsed::<Precision>(args.precision.clone(), "--precision")?;
    Ok(TrainConfig {
        learning_rate: cfg
            .pick(args.learning_rate, "learning_rate")?
            .unwrap_or(d.learning_rate),
        batch_size: cfg.pick(args.batch_size, "batch_size")?.unwrap_or(d.batch_size),
        max_epochs: cfg.pick(args.max_epochs, "max_epochs")?.unwrap_or(d.max_epochs),
        patience: cfg.pick(args.patience, "patience")?.unwrap_or(d.patience),
        seed: ctx.seed,
        precision: match precision {
            Some(p) => p,
            None => cfg.get("precision")?.unwrap_or(d.precision),
        },
    })
}

pub fn train(ctx: &Context, args: TrainArgs) -> Result<()> {
    let cfg = &ctx.config;
    let arch = match parsed::<Architecture>(args.arch.clone(), "--arch")? {
        Some(a) => a,
        None => cfg.get("arch")?.unwrap_or(Architecture::KwsCnn),
    };
    let frame_len = cfg.pick(args.frame_len, "frame_len")?.unwrap_or(DEFAULT_FRAME_LEN);
    let tc = train_config(ctx, &args)?;
    let manifest = cfg.require_path(args.manifest.clone(), "manifest")?;
    let mut records = read_records(&manifest)?;
    let label_map = label_map_for(cfg, &args, &records)?;
    let before = records.len();
    records.retain(|r| label_map.index_of(&r.keyword).is_some());
    if records.len() < before {
        eprintln!("note: {} records outside the label map ignored", before - records.len());
    }

    if records.iter().any(|r| r.split.is_none()) {
        let ratios = match args.split.clone().or_else(|| cfg.raw("split").map(String::from)) {
            Some(s) => parse_ratios(&s)?,
            None => [0.64, 0.16, 0.20],
        };
        let mode = match args
            .split_mode
            .clone()
            .or_else(|| cfg.raw("split_mode").map(String::from))
        {
            None => SplitMode::auto(&records),
            Some(m) if m == "auto" => SplitMode::auto(&records),
            Some(m) => m
                .parse::<SplitMode>()
                .map_err(|e| UsageError(format!("--split-mode: {e}")))?,
        };
        records = split_manifest(&records, ratios, mode, ctx.seed)?;
    }
    let part = |s: Split| -> Vec<UtteranceRecord> { records.iter().filter(|r| r.split == Some(s)).cloned().collect() };
    let root = Path::new("/");
    let train_set = load_dataset(&part(Split::Train), root, &label_map, frame_len)?;
    let val_set = load_dataset(&part(Split::Val), root, &label_map, frame_len)?;
    log::info!(
        "{arch}: {} classes, {} train / {} val utterances",
        label_map.len(),
        train_set.len(),
        val_set.len()
    );

    let mut model: ModelGraph<f32> = match arch {
        Architecture::KwsCnn => build_kws_cnn(frame_len, &label_map, ctx.seed)?,
        Architecture::DenseBaseline => build_dense_baseline(frame_len, &label_map, ctx.seed)?,
    };
    let history = fit(&mut model, &train_set, &val_set, &tc)?;

    let checkpoint = cfg
        .path(args.checkpoint, "checkpoint")
        .unwrap_or_else(|| ctx.out.join("model.kws"));
    let meta = TrainingMetadata {
        epochs_run: history.epochs.len(),
        best_epoch: Some(history.best_epoch),
        best_val_loss: history.best_val_loss(),
        seed: Some(ctx.seed),
    };
    save_checkpoint(&checkpoint, &model, &meta)?;
    history.write_csv(&ctx.out.join("history.csv"))?;
    write_manifest_csv(&ctx.out.join("splits.csv"), &records)?;
    let best = &history.epochs[history.best_epoch - 1];
    println!(
        "best epoch {} of {}: val_loss {} val_acc {}; checkpoint {}",
        history.best_epoch,
        history.epochs.len(),
        best.val_loss,
        best.val_acc,
        checkpoint.display()
    );
    Ok(())
}

pub fn eval(ctx: &Context, args: EvalArgs) -> Result<()> {
    let cfg = &ctx.config;
    let checkpoint = cfg.require_path(args.checkpoint, "checkpoint")?;
    let manifest = cfg.require_path(args.manifest, "manifest")?;
    let model = load_checkpoint(&checkpoint)?.model;
    let records = read_records(&manifest)?;
    let wanted = match args.split.as_deref() {
        Some("all") => None,
        Some(s) => Some(s.parse::<Split>().map_err(|e| UsageError(format!("--split: {e}")))?),
        None if records.iter().any(|r| r.split == Some(Split::Test)) => Some(Split::Test),
        None => None,
    };
    let chosen: Vec<UtteranceRecord> = records
        .into_iter()
        .filter(|r| wanted.is_none() || r.split == wanted)
        .collect();
    if chosen.is_empty() {
        bail!(UsageError("no records in the requested split".into()));
    }
    let data = load_dataset(&chosen, Path::new("/"), &model.label_map, model.frame_len)?;
    let report = evaluate(&model, &data)?;
    let path = ctx.out.join("eval.json");
    write(&path, report.to_json().as_bytes())?;
    let (p, r, f) = if args.weighted {
        (report.weighted_precision, report.weighted_recall, report.weighted_f1)
    } else {
        (report.macro_precision, report.macro_recall, report.macro_f1)
    };
    let avg = if args.weighted { "weighted" } else { "macro" };
    println!(
        "accuracy {} {avg} precision {p} recall {r} f1 {f} on {} utterances; report {}",
        report.accuracy,
        report.total,
        path.display()
    );
    Ok(())
}

fn spot_config(cfg: &PipelineConfig, args: &DetectorArgs, frame_len: Option<usize>) -> Result<SpotConfig> {
    let d = SpotConfig::default();
    let window_default = frame_len.map_or(d.window_s, |n| n as f64 / PIPELINE_RATE as f64);
    Ok(SpotConfig {
        window_s: cfg.pick(args.window, "window_s")?.unwrap_or(window_default),
        hop_s: cfg.pick(args.hop, "hop_s")?.unwrap_or(d.hop_s),
        threshold: cfg.pick(args.threshold, "threshold")?.unwrap_or(d.threshold),
        min_gap_s: cfg.pick(args.min_gap, "min_gap_s")?.unwrap_or(d.min_gap_s),
        background_label: args
            .background_label
            .clone()
            .or_else(|| cfg.raw("background_label").map(String::from)),
    })
}

fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && !f.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_recording(path: &Path, decoder: Option<&str>) -> Result<AudioClip> {
    let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        return Ok(load_wav(path)?);
    }
    let Some(cmd) = decoder else {
        bail!(UsageError(format!(
            "{} is not a WAV file and no --decoder-cmd is configured",
            path.display()
        )));
    };
    let dir = tempfile::tempdir()?;
    let tmp = dir.path().join("decoded.wav");
    decode_external(cmd, path, &tmp)?;
    Ok(load_wav(&tmp)?)
}

fn recording_id(path: &Path) -> String {
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    let name = name.strip_suffix(".events.csv").unwrap_or(&name);
    Path::new(name)
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned()
}

fn spot_one(
    model: &ModelGraph<f32>,
    path: &Path,
    sc: &SpotConfig,
    decoder: Option<&str>,
) -> Result<Vec<DetectionEvent>> {
    let clip = load_recording(path, decoder).with_context(|| format!("cannot load {}", path.display()))?;
    detect(model, &clip, sc).with_context(|| format!("spotting failed on {}", path.display()))
}

pub fn spot(ctx: &Context, args: SpotArgs) -> Result<()> {
    let cfg = &ctx.config;
    let checkpoint = cfg.require_path(args.checkpoint, "checkpoint")?;
    let model = load_checkpoint(&checkpoint)?.model;
    let sc = spot_config(cfg, &args.detector, Some(model.frame_len))?;
    let decoder = args.decoder_cmd.or_else(|| cfg.raw("decoder_cmd").map(String::from));
    let jobs = cfg.pick(args.jobs, "jobs")?.unwrap_or(1);
    if jobs == 0 {
        bail!(UsageError("--jobs must be at least 1".into()));
    }
    let files = expand_inputs(&args.inputs)?;
    if files.is_empty() {
        bail!(UsageError("no recordings found".into()));
    }

    let mut results: Vec<Option<Result<Vec<DetectionEvent>>>> = (0..files.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let per = files.len().div_ceil(jobs);
        for (chunk, slots) in files.chunks(per).zip(results.chunks_mut(per)) {
            let (model, sc, decoder) = (&model, &sc, decoder.as_deref());
            s.spawn(move || {
                for (f, slot) in chunk.iter().zip(slots) {
                    *slot = Some(spot_one(model, f, sc, decoder));
                }
            });
        }
    });
    for (file, result) in files.iter().zip(results) {
        let events = result.expect("every file is processed")?;
        let path = ctx.out.join(format!("{}.events.csv", recording_id(file)));
        write(&path, events_csv(&events).as_bytes())?;
        println!("{}: {} events -> {}", file.display(), events.len(), path.display());
    }
    Ok(())
}

pub fn report(ctx: &Context, args: ReportArgs) -> Result<()> {
    if args.recording.is_some() && args.events.len() > 1 {
        bail!(UsageError("--recording applies to a single events file".into()));
    }
    let sc = spot_config(&ctx.config, &args.detector, None)?;
    for file in &args.events {
        let events = read_events_csv(file)?;
        let id = args.recording.clone().unwrap_or_else(|| recording_id(file));
        let mut report = frequency_report(&id, &events);
        report.config = Some(sc.clone());
        write(&ctx.out.join(format!("{id}.report.json")), report.to_json().as_bytes())?;
        write(
            &ctx.out.join(format!("{id}.counts.csv")),
            report.counts_csv().as_bytes(),
        )?;
        let counts: Vec<String> = report.counts.iter().map(|(k, n)| format!("{k}={n}")).collect();
        println!(
            "{id}: {}",
            if counts.is_empty() {
                "no keywords".into()
            } else {
                counts.join(" ")
            }
        );
    }
    Ok(())
}
