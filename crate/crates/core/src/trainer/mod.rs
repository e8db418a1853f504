//! Corpus handling, a synthetic corpus, and the training loop.

mod corpus;
mod split;
mod synth;

pub use corpus::{align_all, layout_of, read_score, write_corpus, Corpus, CorpusEntry};
pub use split::{split_corpus, CorpusSplit, DEFAULT_FRACTIONS};
pub use synth::{generate_synthetic_corpus, RulePredictor, RuleSet, SynthConfig, PIANO_POOL};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ebm::{CdConfig, ContrastiveDivergence, EbmError, FactorDims, ModelKind, ModelParams, OutputMode, SamplingConfig, TrainingExample};
use crate::error::Error;
use crate::eval::evaluate_model;
use crate::projection::{make_training_pairs, Granularity, ModelBinding, OrchestrationModel, DEFAULT_HORIZON};
use crate::score_io::AlignedPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub model_kind: ModelKind,
    pub n_hidden: usize,
    /// Factors of each FGcRBM triple; ignored by the other kinds.
    pub n_factors: usize,
    pub horizon: usize,
    pub quantization: u32,
    pub cd_k: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation improvement; 0 never stops early.
    pub patience: usize,
    /// Weight initialization, CD chains and validation sampling.
    pub seed: u64,
    /// Minibatch order and the corpus split.
    pub shuffle_seed: u64,
    /// Granularity of the training pairs and of the validation metric.
    pub granularity: Granularity,
    pub validation_gibbs_steps: usize,
    pub threshold: f64,
    pub split_fractions: [f64; 3],
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let cd = CdConfig::default();
        Self {
            model_kind: ModelKind::Crbm,
            n_hidden: 200,
            n_factors: 50,
            horizon: DEFAULT_HORIZON,
            quantization: 4,
            cd_k: cd.k,
            learning_rate: cd.learning_rate,
            momentum: cd.momentum,
            weight_decay: cd.weight_decay,
            batch_size: 100,
            max_epochs: 200,
            patience: 20,
            seed: 0,
            shuffle_seed: 1,
            granularity: Granularity::Event,
            validation_gibbs_steps: SamplingConfig::default().gibbs_steps,
            threshold: SamplingConfig::default().threshold,
            split_fractions: DEFAULT_FRACTIONS,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("n_hidden", self.n_hidden),
            ("horizon", self.horizon),
            ("quantization", self.quantization as usize),
            ("cd_k", self.cd_k),
            ("batch_size", self.batch_size),
            ("validation_gibbs_steps", self.validation_gibbs_steps),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.model_kind == ModelKind::Fgcrbm && self.n_factors == 0 {
            return Err(Error::Config("n_factors must be at least 1 for an fgcrbm".into()));
        }
        if self.max_epochs > 0 && self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be finite and non-negative".into()));
        }
        self.sampling().validate()?;
        Ok(())
    }

    pub fn cd(&self) -> CdConfig {
        CdConfig {
            k: self.cd_k,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    /// Generation settings used for validation, and stored as the model's defaults.
    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            gibbs_steps: self.validation_gibbs_steps,
            seed: self.seed,
            output_mode: OutputMode::MeanField,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub reconstruction_error: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_validation_accuracy: Option<f64>,
    pub stopped_early: bool,
    pub training_pairs: usize,
    pub orchestra_dim: usize,
    /// Corpus files read, in order.
    pub files_read: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: OrchestrationModel,
    pub log: TrainingLog,
}

fn examples(binding: &ModelBinding, pairs: &[AlignedPair], config: &TrainingConfig) -> Result<Vec<TrainingExample>, Error> {
    let mut out = Vec::new();
    for p in pairs {
        for tp in make_training_pairs(&p.piano, &p.orchestra, config.horizon, config.granularity, true)? {
            out.push(binding.training_example(&tp.target, &tp.context)?);
        }
    }
    Ok(out)
}

/// Trains a model on `split.train`, selecting the epoch with the best
/// validation accuracy. The layout is built from the training and validation
/// files; test files are never opened.
pub fn train(config: &TrainingConfig, corpus: &Corpus, split: &CorpusSplit) -> Result<TrainingOutcome, Error> {
    config.validate()?;
    if corpus.quantization() != config.quantization {
        return Err(Error::Config(format!(
            "corpus is read at Q={}, config asks for Q={}",
            corpus.quantization(),
            config.quantization
        )));
    }
    if split.train.is_empty() {
        return Err(Error::Corpus("the training split is empty".into()));
    }
    let train_entries = corpus.load_all(&split.train)?;
    let val_entries = corpus.load_all(&split.validation)?;
    let all: Vec<CorpusEntry> = train_entries.iter().chain(&val_entries).cloned().collect();
    let layout = layout_of(&all)?;
    let train_pairs = align_all(&train_entries, &layout)?;
    let val_pairs = if val_entries.is_empty() {
        log::warn!("no validation files; selecting on the training files");
        train_pairs.clone()
    } else {
        align_all(&val_entries, &layout)?
    };

    let binding = ModelBinding::new(config.model_kind, layout.total_dim(), config.horizon)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ModelParams::init(
        config.model_kind,
        binding.unit_dims(config.n_hidden),
        FactorDims::uniform(config.n_factors.max(1)),
        &mut init_rng,
    )?;
    let mut model = OrchestrationModel::new(params, layout, config.quantization, config.horizon)?;
    model.sampling = config.sampling();
    model.training = serde_json::to_value(config).expect("config serializes");

    let data = examples(&binding, &train_pairs, config)?;
    let mut log = TrainingLog {
        training_pairs: data.len(),
        orchestra_dim: model.orchestra_dim(),
        ..Default::default()
    };
    if data.is_empty() {
        return Err(Error::Corpus("the training files yield no training pairs".into()));
    }

    let mut cd = ContrastiveDivergence::new(config.cd())?;
    let mut cd_rng = ChaCha8Rng::seed_from_u64(config.seed);
    cd_rng.set_stream(1);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let sampling = config.sampling();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut recon = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| data[i].clone()).collect();
            recon += cd.update(&mut model.params, &batch, &mut cd_rng).map_err(|e| match e {
                EbmError::Diverged(detail) => Error::Diverged { epoch, detail },
                other => other.into(),
            })?;
            batches += 1;
        }
        let val = evaluate_model(&model, "validation", &val_pairs, config.granularity, &sampling)?.accuracy_percent;
        let reconstruction_error = recon / batches as f64;
        log::info!("epoch {epoch}: reconstruction {reconstruction_error:.5}, validation {val:.2}%");
        log.epochs.push(EpochRecord {
            epoch,
            reconstruction_error,
            validation_accuracy: val,
        });
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, model.params.clone()));
            log.best_epoch = Some(epoch);
            log.best_validation_accuracy = Some(val);
            stale = 0;
        } else {
            stale += 1;
            if config.patience > 0 && stale >= config.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    log.files_read = corpus.access_log();
    Ok(TrainingOutcome { model, log })
}
