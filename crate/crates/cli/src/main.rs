//! `kws`: ingest, synthesize, train, evaluate, spot and report.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kws_core::audio::AudioError;
use kws_core::corpus::CorpusError;
use kws_core::detector::DetectError;
use kws_core::model::ModelError;
use kws_core::nn::NnError;
use kws_core::training::TrainError;
use kws_core::ErrorClass;

use crate::config::PipelineConfig;

/// Bad flags, config keys or flag combinations.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "kws", version, about = "Keyword spotting on raw 8 kHz audio")]
pub struct Cli {
    /// Flat `key = value` configuration file; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for splits, initialisation, shuffling and synthesis
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decode, resample and catalogue a directory of utterances
    Ingest(IngestArgs),
    /// Generate the synthetic tone-burst dataset (and optionally a long stream)
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus per-epoch history
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest
    Eval(EvalArgs),
    /// Scan long recordings for keywords and write event lists
    Spot(SpotArgs),
    /// Aggregate event lists into per-recording keyword counts
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// Keyword corpus CSV; may be repeated, earlier files win conflicts
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Converter for non-WAV files, invoked as `<cmd> <input> <output.wav>`
    #[arg(long)]
    pub decoder_cmd: Option<String>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long, conflicts_with = "clean")]
    pub snr_db: Option<f64>,
    /// No additive noise
    #[arg(long)]
    pub clean: bool,
    #[arg(long)]
    pub speakers: Option<usize>,
    /// Add a noise-only background class
    #[arg(long)]
    pub background: bool,
    /// Also write a long recording of this many seconds
    #[arg(long)]
    pub stream_secs: Option<f64>,
    /// Plant a burst in the stream, as CLASS@SECONDS; repeatable
    #[arg(long, requires = "stream_secs")]
    pub plant: Vec<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Corpus used to resolve --keywords spellings
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated target keywords (default: every keyword in the manifest)
    #[arg(long)]
    pub keywords: Option<String>,
    /// kws-cnn or dense-baseline
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub frame_len: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// f32 or f64
    #[arg(long)]
    pub precision: Option<String>,
    /// Train/val/test ratios, e.g. 0.64,0.16,0.20 (ignored when the manifest has splits)
    #[arg(long)]
    pub split: Option<String>,
    /// auto, by_utterance or by_speaker
    #[arg(long)]
    pub split_mode: Option<String>,
    /// Where to write the checkpoint (default: <out>/model.kws)
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// train, val, test or all (default: test when assigned, else all)
    #[arg(long)]
    pub split: Option<String>,
    /// Print support-weighted averages instead of macro averages
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args, Debug)]
pub struct DetectorArgs {
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub hop: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub min_gap: Option<f64>,
    /// Class that never produces events
    #[arg(long)]
    pub background_label: Option<String>,
}

#[derive(Args, Debug)]
pub struct SpotArgs {
    /// Recordings, or directories of recordings
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub decoder_cmd: Option<String>,
    /// Recordings processed in parallel
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Event CSVs written by `spot`
    #[arg(required = true)]
    pub events: Vec<PathBuf>,
    /// Recording id (single input only; default: the file name)
    #[arg(long)]
    pub recording: Option<String>,
    #[command(flatten)]
    pub detector: DetectorArgs,
}

fn class_of(err: &anyhow::Error) -> ErrorClass {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return ErrorClass::Argument;
        }
        if let Some(e) = cause.downcast_ref::<AudioError>() {
            return e.class();
        }
        if let Some(e) = cause.downcast_ref::<CorpusError>() {
            return e.class();
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return e.class();
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return e.class();
        }
        if let Some(e) = cause.downcast_ref::<DetectError>() {
            return e.class();
        }
        if let Some(e) = cause.downcast_ref::<NnError>() {
            return e.class();
        }
        if cause.is::<std::io::Error>() {
            return ErrorClass::Io;
        }
    }
    ErrorClass::Data
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Argument => 1,
        ErrorClass::Io => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn class_name(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Argument => "usage",
        ErrorClass::Io => "io",
        ErrorClass::Data => "data",
        ErrorClass::Numeric => "numeric",
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let ctx = commands::Context {
        seed: config.pick(cli.seed, "seed")?.unwrap_or(0),
        out: config.path(cli.out, "out").unwrap_or_else(|| PathBuf::from(".")),
        config,
    };
    match cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Spot(a) => commands::spot(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let class = class_of(&err);
            let msg = render_chain(&err);
            eprintln!("error[{}]: {msg}", class_name(class));
            ExitCode::from(exit_code(class))
        }
    }
}

/// Joins the cause chain, skipping causes whose text the previous message already ends with.
fn render_chain(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if msg.ends_with(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg.replace('\n', " ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn classes_map_to_exit_codes() {
        let usage = anyhow::Error::new(UsageError("x".into())).context("while parsing");
        assert_eq!(exit_code(class_of(&usage)), 1);
        let io = anyhow::Error::new(std::io::Error::other("gone"));
        assert_eq!(exit_code(class_of(&io)), 2);
        let numeric = anyhow::Error::new(TrainError::NonFinite {
            epoch: 3,
            what: "loss".into(),
        });
        assert_eq!(exit_code(class_of(&numeric)), 4);
        let data = anyhow::Error::new(ModelError::CorruptCheckpoint {
            offset: 4,
            msg: "x".into(),
        });
        assert_eq!(exit_code(class_of(&data)), 3);
    }

    #[test]
    fn plant_requires_a_stream() {
        let err = Cli::try_parse_from(["kws", "synth", "--plant", "0@10"]).unwrap_err();
        assert!(err.use_stderr());
        assert!(Cli::try_parse_from(["kws", "synth", "--stream-secs", "30", "--plant", "0@10"]).is_ok());
    }

    #[test]
    fn chain_rendering_drops_repeated_causes() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        let err = anyhow::Error::new(io).context("reading x: gone").context("loading");
        assert_eq!(render_chain(&err), "loading: reading x: gone");
    }
}
