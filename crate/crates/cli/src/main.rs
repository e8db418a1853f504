use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lop_core::ebm::{ModelKind, SamplingConfig};
use lop_core::eval::{evaluate, ModelPredictor, Predictor, RandomBaseline, RepeatBaseline};
use lop_core::projection::{project_score, Granularity, OrchestrationModel};
use lop_core::score_io::{align_pair, parse_midi, parse_score_json, score_to_json, PianoRoll};
use lop_core::trainer::{
    align_all, generate_synthetic_corpus, layout_of, read_score, split_corpus, train, write_corpus, Corpus, RuleSet,
    SynthConfig, TrainingConfig,
};
use lop_server::bench::{bench_ticks, untrained_model};
use lop_server::ServerArgs;

#[derive(Parser)]
#[command(name = "lop", version, about = "Projective orchestration of piano scores with conditional RBMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreFormat {
    Midi,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Random,
    Repeat,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a MIDI or JSON score into the JSON piano-roll format.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        quantization: u32,
        /// Input format; guessed from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<ScoreFormat>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic piano/orchestra corpus.
    Synth {
        #[arg(long, default_value = "register-split")]
        rule_set: String,
        #[arg(long, default_value_t = 40)]
        n_files: usize,
        /// Length of each file in quarter notes.
        #[arg(long, default_value_t = 32)]
        length: usize,
        #[arg(long, default_value_t = 1.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        quantization: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a corpus directory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a model or a baseline on every pair of a corpus directory.
    Eval {
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "event")]
        granularity: Granularity,
        /// Defaults to the model's quantization, or 4 for baselines.
        #[arg(long)]
        quantization: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        gibbs_steps: usize,
        /// Also report accuracy with the piano silenced.
        #[arg(long)]
        corrupt_piano: bool,
        #[arg(long, value_enum, default_value = "json")]
        report: ReportFormat,
    },
    /// Orchestrate a piano score.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        piano: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        gibbs_steps: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the live projection server.
    Serve(ServerArgs),
    /// Time live ticks of a model file, or of an untrained model of a given size.
    BenchTick {
        #[arg(long, conflicts_with_all = ["kind", "orchestra_dim", "n_hidden", "horizon", "n_factors"])]
        model: Option<PathBuf>,
        #[arg(long, default_value = "crbm")]
        kind: String,
        #[arg(long, default_value_t = 1220)]
        orchestra_dim: usize,
        #[arg(long, default_value_t = 3000)]
        n_hidden: usize,
        #[arg(long, default_value_t = 4)]
        horizon: usize,
        #[arg(long, default_value_t = 50)]
        n_factors: usize,
        #[arg(long, default_value_t = 20)]
        gibbs_steps: usize,
        #[arg(long, default_value_t = 200)]
        ticks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_kind(s: &str) -> Result<ModelKind> {
    serde_json::from_value(serde_json::Value::String(s.into())).with_context(|| format!("unknown model kind `{s}`"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ingest(input: &Path, quantization: u32, format: Option<ScoreFormat>, out: &Path) -> Result<()> {
    let format = match format {
        Some(f) => f,
        None => match input.extension().and_then(|e| e.to_str()) {
            Some("mid" | "midi") => ScoreFormat::Midi,
            Some("json") => ScoreFormat::Json,
            _ => bail!("cannot tell the format of {}; pass --format", input.display()),
        },
    };
    let rolls = match format {
        ScoreFormat::Midi => {
            let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
            parse_midi(&bytes, quantization)?
        }
        ScoreFormat::Json => parse_score_json(&std::fs::read_to_string(input)?)?,
    };
    write(out, &score_to_json(&rolls)?)?;
    log::info!("{} parts, {} frames", rolls.len(), rolls.iter().map(PianoRoll::n_frames).max().unwrap_or(0));
    Ok(())
}

fn run_train(config: Option<&Path>, corpus: &Path, out: &Path, log_path: Option<&Path>) -> Result<()> {
    let config: TrainingConfig = match config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => TrainingConfig::default(),
    };
    let corpus = Corpus::open(corpus, config.quantization)?;
    let split = split_corpus(&corpus.names(), config.split_fractions, config.shuffle_seed)?;
    let outcome = train(&config, &corpus, &split)?;
    outcome.model.save(out)?;
    let log = serde_json::json!({ "split": split, "log": outcome.log });
    match log_path {
        Some(p) => write(p, &serde_json::to_string_pretty(&log)?)?,
        None => eprintln!(
            "best epoch {:?}, validation accuracy {:?}",
            outcome.log.best_epoch, outcome.log.best_validation_accuracy
        ),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    model: Option<&Path>,
    baseline: Option<Baseline>,
    corpus: &Path,
    granularity: Granularity,
    quantization: Option<u32>,
    sampling: SamplingConfig,
    corrupt: bool,
    report: ReportFormat,
) -> Result<()> {
    let model = model.map(OrchestrationModel::load).transpose()?;
    let q = quantization.or(model.as_ref().map(|m| m.quantization)).unwrap_or(4);
    if let Some(m) = &model {
        if m.quantization != q {
            bail!("the model was trained at Q={}, not Q={q}", m.quantization);
        }
    }
    let corpus = Corpus::open(corpus, q)?;
    let entries = corpus.load_all(&corpus.names())?;
    let layout = match &model {
        Some(m) => m.layout.clone(),
        None => layout_of(&entries)?,
    };
    let pairs = align_all(&entries, &layout)?;
    let mut predictor: Box<dyn Predictor + '_> = match (&model, baseline) {
        (Some(m), _) => Box::new(ModelPredictor::new(m.kind().as_str(), m, sampling.clone())),
        (None, Some(Baseline::Random)) => Box::new(RandomBaseline::new(sampling.seed)),
        (None, Some(Baseline::Repeat)) => Box::new(RepeatBaseline),
        (None, None) => bail!("pass --model or --baseline"),
    };
    let mut reports = vec![evaluate(predictor.as_mut(), &pairs, granularity, q)?];
    if corrupt {
        let silenced: Vec<_> = pairs
            .iter()
            .map(|p| lop_core::score_io::AlignedPair { piano: p.piano.silenced(), ..p.clone() })
            .collect();
        let r = evaluate(predictor.as_mut(), &silenced, granularity, q)?;
        let id = format!("{} (piano silenced)", r.model);
        reports.push(r.with_labels(id, granularity, q));
    }
    match report {
        ReportFormat::Json if reports.len() == 1 => println!("{}", reports[0].to_json()),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&reports)?),
        ReportFormat::Markdown => reports.iter().for_each(|r| println!("{}", r.to_markdown())),
    }
    Ok(())
}

fn run_project(model: &Path, piano: &Path, sampling: SamplingConfig, out: &Path) -> Result<()> {
    let model = OrchestrationModel::load(model)?;
    let rolls = read_score(piano, model.quantization)?;
    let piano = PianoRoll::merge("piano", &rolls)?;
    if piano.quantization() != model.quantization {
        bail!("the piano score is at Q={}, the model at Q={}", piano.quantization(), model.quantization);
    }
    let (piano_seq, _) = align_pair(&piano, &[], &model.layout)?;
    let orchestra = project_score(&model, &piano_seq, &sampling)?;
    let parts = model.layout.to_rolls(orchestra.states(), model.quantization, 80);
    write(out, &score_to_json(&parts)?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest { input, quantization, format, out } => ingest(&input, quantization, format, &out),
        Command::Synth { rule_set, n_files, length, density, seed, quantization, out } => {
            let config = SynthConfig { rule_set: rule_set.parse::<RuleSet>()?, n_files, length, density, seed, quantization };
            write_corpus(&out, &generate_synthetic_corpus(&config)?)?;
            Ok(())
        }
        Command::Train { config, corpus, out, log } => run_train(config.as_deref(), &corpus, &out, log.as_deref()),
        Command::Eval { model, baseline, corpus, granularity, quantization, seed, gibbs_steps, corrupt_piano, report } => {
            let sampling = SamplingConfig { seed, gibbs_steps, ..Default::default() };
            run_eval(model.as_deref(), baseline, &corpus, granularity, quantization, sampling, corrupt_piano, report)
        }
        Command::Project { model, piano, seed, gibbs_steps, threshold, out } => {
            let sampling = SamplingConfig { seed, gibbs_steps, threshold, ..Default::default() };
            run_project(&model, &piano, sampling, &out)
        }
        Command::Serve(args) => {
            let state = args.state()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(lop_server::run(args.addr(), state))?;
            Ok(())
        }
        Command::BenchTick { model, kind, orchestra_dim, n_hidden, horizon, n_factors, gibbs_steps, ticks, seed } => {
            let model = match model {
                Some(p) => OrchestrationModel::load(p)?,
                None => untrained_model(parse_kind(&kind)?, orchestra_dim, n_hidden, horizon, n_factors, seed)?,
            };
            let sampling = SamplingConfig { gibbs_steps, seed, ..Default::default() };
            let result = bench_ticks(model, sampling, ticks)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
    }
}
