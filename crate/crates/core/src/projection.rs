//! Wiring score frames onto model units, and whole-score generation.
//!
//! At frame `t` the model sees the present piano frame `P(t)` and the `N`
//! previous orchestral frames `O(t−N) … O(t−1)` and estimates `O(t)`:
//!
//! | kind   | visible                    | context                | feature |
//! |--------|----------------------------|------------------------|---------|
//! | rbm    | `P(t), O(t−N) … O(t)`      | (prefix clamped)       |         |
//! | crbm   | `O(t)`                     | `P(t), O(t−N) … O(t−1)`|         |
//! | fgcrbm | `O(t)`                     | `O(t−N) … O(t−1)`      | `P(t)`  |

use std::path::Path;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ebm::io::{read_container, write_container};
use crate::ebm::{binarize, Context, ModelKind, ModelParams, OutputMode, SamplingConfig, TrainingExample, UnitDims};
use crate::error::Error;
use crate::score_io::{extract_events, OrchestraLayout, StateSequence, PIANO_KEYS};

/// Horizon used when a configuration does not name one.
pub const DEFAULT_HORIZON: usize = 4;

/// Which time indices a sequence is evaluated (or trained) on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Every frame.
    Frame,
    /// Frames where the orchestra changes, plus frame 0.
    Event,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Frame => "frame",
            Granularity::Event => "event",
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frame" => Ok(Granularity::Frame),
            "event" => Ok(Granularity::Event),
            other => Err(format!("unknown granularity `{other}` (expected frame or event)")),
        }
    }
}

/// The present piano frame and the `N` previous orchestral frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionContext {
    pub piano_now: Array1<f64>,
    pub orchestra_past: Vec<Array1<f64>>,
}

impl ProjectionContext {
    /// Silent piano and silent past.
    pub fn silent(orchestra_dim: usize, horizon: usize) -> Self {
        Self {
            piano_now: Array1::zeros(PIANO_KEYS),
            orchestra_past: vec![Array1::zeros(orchestra_dim); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.orchestra_past.len()
    }
}

fn concat<'a>(parts: impl IntoIterator<Item = &'a Array1<f64>>) -> Array1<f64> {
    let mut out = Vec::new();
    for p in parts {
        out.extend(p.iter().copied());
    }
    Array1::from(out)
}

/// How a model kind consumes a [`ProjectionContext`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelBinding {
    pub kind: ModelKind,
    pub orchestra_dim: usize,
    pub horizon: usize,
}

impl ModelBinding {
    pub fn new(kind: ModelKind, orchestra_dim: usize, horizon: usize) -> Result<Self, Error> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if orchestra_dim == 0 {
            return Err(Error::Config("the orchestra layout has no pitches".into()));
        }
        Ok(Self {
            kind,
            orchestra_dim,
            horizon,
        })
    }

    /// Unit counts of a model bound this way.
    pub fn unit_dims(&self, n_hidden: usize) -> UnitDims {
        let (d, n) = (self.orchestra_dim, self.horizon);
        let (visible, context, feature) = match self.kind {
            ModelKind::Rbm => (PIANO_KEYS + (n + 1) * d, 0, 0),
            ModelKind::Crbm => (d, PIANO_KEYS + n * d, 0),
            ModelKind::Fgcrbm => (d, n * d, PIANO_KEYS),
        };
        UnitDims {
            visible,
            hidden: n_hidden,
            context,
            feature,
        }
    }

    /// Checks that `params` has exactly the unit counts this binding needs.
    pub fn check(&self, params: &ModelParams) -> Result<(), Error> {
        if params.kind() != self.kind {
            return Err(Error::Config(format!(
                "model is a {}, binding expects a {}",
                params.kind(),
                self.kind
            )));
        }
        let have = params.dims();
        let want = self.unit_dims(have.hidden);
        for (what, w, h) in [
            ("visible units", want.visible, have.visible),
            ("context units", want.context, have.context),
            ("feature units", want.feature, have.feature),
        ] {
            if w != h {
                return Err(Error::dimension(format!("{} {what}", self.kind), w, h));
            }
        }
        Ok(())
    }

    fn check_context(&self, ctx: &ProjectionContext) -> Result<(), Error> {
        if ctx.piano_now.len() != PIANO_KEYS {
            return Err(Error::dimension("piano frame", PIANO_KEYS, ctx.piano_now.len()));
        }
        if ctx.orchestra_past.len() != self.horizon {
            return Err(Error::dimension("orchestral past frames", self.horizon, ctx.orchestra_past.len()));
        }
        if let Some(o) = ctx.orchestra_past.iter().find(|o| o.len() != self.orchestra_dim) {
            return Err(Error::dimension("orchestra frame", self.orchestra_dim, o.len()));
        }
        Ok(())
    }

    /// The clamped units for generating `O(t)`.
    pub fn context(&self, ctx: &ProjectionContext) -> Result<Context, Error> {
        self.check_context(ctx)?;
        let piano_and_past = || concat(std::iter::once(&ctx.piano_now).chain(&ctx.orchestra_past));
        Ok(match self.kind {
            ModelKind::Rbm => Context::Inpaint(piano_and_past()),
            ModelKind::Crbm => Context::Conditional(piano_and_past()),
            ModelKind::Fgcrbm => Context::Gated {
                context: concat(&ctx.orchestra_past),
                feature: ctx.piano_now.clone(),
            },
        })
    }

    /// The training example teaching the model that `target` follows `ctx`.
    pub fn training_example(&self, target: &Array1<f64>, ctx: &ProjectionContext) -> Result<TrainingExample, Error> {
        if target.len() != self.orchestra_dim {
            return Err(Error::dimension("orchestra frame", self.orchestra_dim, target.len()));
        }
        let context = self.context(ctx)?;
        Ok(match context {
            Context::Inpaint(known) => TrainingExample {
                visible: concat([&known, target]),
                context: Context::Unconditioned,
            },
            context => TrainingExample {
                visible: target.clone(),
                context,
            },
        })
    }
}

/// Target frame `O(t)` with its conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub time: usize,
    pub target: Array1<f64>,
    pub context: ProjectionContext,
}

fn check_aligned(piano: &StateSequence, orchestra: &StateSequence) -> Result<(), Error> {
    if piano.len() != orchestra.len() {
        return Err(Error::dimension("aligned sequence length", piano.len(), orchestra.len()));
    }
    if !piano.is_empty() && piano.dim() != PIANO_KEYS {
        return Err(Error::dimension("piano frame", PIANO_KEYS, piano.dim()));
    }
    Ok(())
}

/// The indices a sequence is evaluated on at `granularity`.
pub fn evaluation_times(orchestra: &StateSequence, granularity: Granularity) -> Vec<usize> {
    match granularity {
        Granularity::Frame => (0..orchestra.len()).collect(),
        Granularity::Event => extract_events(orchestra, true).times,
    }
}

/// Ground-truth conditioning for each evaluation index.
///
/// At frame granularity the past is the `N` preceding frames; at event
/// granularity it is the states of the `N` preceding events. Positions before
/// the start are silent. With `pad_start` false, indices whose past would
/// reach before the start are skipped.
fn teacher_contexts(
    piano: &StateSequence,
    orchestra: &StateSequence,
    horizon: usize,
    granularity: Granularity,
    pad_start: bool,
) -> Vec<(usize, ProjectionContext)> {
    if orchestra.is_empty() {
        return Vec::new();
    }
    let silence = Array1::zeros(orchestra.dim());
    let (times, history): (Vec<usize>, Vec<&Array1<f64>>) = match granularity {
        Granularity::Frame => ((0..orchestra.len()).collect(), orchestra.states().iter().collect()),
        Granularity::Event => {
            let events = extract_events(orchestra, true);
            let states = events.times.iter().map(|&t| &orchestra.states()[t]).collect();
            (events.times, states)
        }
    };
    times
        .iter()
        .enumerate()
        .filter(|&(i, _)| pad_start || i >= horizon)
        .map(|(i, &t)| {
            let orchestra_past = (0..horizon)
                .map(|k| {
                    let back = horizon - k;
                    if i >= back {
                        history[i - back].clone()
                    } else {
                        silence.clone()
                    }
                })
                .collect();
            let ctx = ProjectionContext {
                piano_now: piano.states()[t].clone(),
                orchestra_past,
            };
            (t, ctx)
        })
        .collect()
}

/// One `(O(t), context)` pair per index of `granularity` (see
/// [`evaluation_times`]), with the ground-truth past.
pub fn make_training_pairs(
    piano: &StateSequence,
    orchestra: &StateSequence,
    horizon: usize,
    granularity: Granularity,
    pad_start: bool,
) -> Result<Vec<TrainingPair>, Error> {
    check_aligned(piano, orchestra)?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    Ok(teacher_contexts(piano, orchestra, horizon, granularity, pad_start)
        .into_iter()
        .map(|(t, context)| TrainingPair {
            time: t,
            target: orchestra.states()[t].clone(),
            context,
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    layout: OrchestraLayout,
    quantization: u32,
    horizon: usize,
    sampling: SamplingConfig,
    #[serde(default)]
    training: serde_json::Value,
}

/// Trained parameters together with everything needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct OrchestrationModel {
    pub params: ModelParams,
    pub layout: OrchestraLayout,
    pub quantization: u32,
    pub horizon: usize,
    /// Defaults for generation; callers may override per call.
    pub sampling: SamplingConfig,
    /// Free-form record of how the model was trained.
    pub training: serde_json::Value,
}

impl OrchestrationModel {
    pub fn new(params: ModelParams, layout: OrchestraLayout, quantization: u32, horizon: usize) -> Result<Self, Error> {
        let model = Self {
            params,
            layout,
            quantization,
            horizon,
            sampling: SamplingConfig::default(),
            training: serde_json::Value::Null,
        };
        model.binding()?.check(&model.params)?;
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn orchestra_dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn binding(&self) -> Result<ModelBinding, Error> {
        ModelBinding::new(self.kind(), self.orchestra_dim(), self.horizon)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Metadata {
            layout: self.layout.clone(),
            quantization: self.quantization,
            horizon: self.horizon,
            sampling: self.sampling.clone(),
            training: self.training.clone(),
        };
        let meta = serde_json::to_value(meta).expect("metadata serializes");
        write_container(&self.params, &meta)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        let (params, meta) = read_container(bytes)?;
        let meta: Metadata = serde_json::from_value(meta).map_err(|e| Error::Metadata(e.to_string()))?;
        if meta.quantization == 0 {
            return Err(Error::Metadata("quantization must be at least 1".into()));
        }
        let mut model = Self::new(params, meta.layout, meta.quantization, meta.horizon)?;
        model.sampling = meta.sampling;
        model.training = meta.training;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Binary estimate of `O(t)`. Mean-field output is thresholded.
    pub fn predict_frame(
        &self,
        ctx: &ProjectionContext,
        config: &SamplingConfig,
        rng: &mut impl Rng,
    ) -> Result<Array1<f64>, Error> {
        let context = self.binding()?.context(ctx)?;
        let out = self.params.clamp(&context)?.generate(config, rng)?;
        Ok(match config.output_mode {
            OutputMode::MeanField => binarize(&out, config.threshold),
            OutputMode::Sample => out,
        })
    }
}

/// Orchestrates a whole piano score, feeding generated frames back as the
/// past. Generation starts from a silent past; the chain is seeded from
/// `config.seed`.
pub fn project_score(
    model: &OrchestrationModel,
    piano: &StateSequence,
    config: &SamplingConfig,
) -> Result<StateSequence, Error> {
    config.validate()?;
    if !piano.is_empty() && piano.dim() != PIANO_KEYS {
        return Err(Error::dimension("piano frame", PIANO_KEYS, piano.dim()));
    }
    let d = model.orchestra_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ctx = ProjectionContext::silent(d, model.horizon);
    let mut out = Vec::with_capacity(piano.len());
    for p in piano.states() {
        ctx.piano_now = p.clone();
        let frame = model.predict_frame(&ctx, config, &mut rng)?;
        ctx.orchestra_past.remove(0);
        ctx.orchestra_past.push(frame.clone());
        out.push(frame);
    }
    Ok(StateSequence::with_dim(out, d, piano.quantization())?)
}

/// Predictions at the evaluation indices of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub times: Vec<usize>,
    pub states: Vec<Array1<f64>>,
}

/// Predicts each evaluation index from the ground-truth past, in mean-field
/// mode thresholded at `config.threshold`.
pub fn teacher_forced_predict(
    model: &OrchestrationModel,
    piano: &StateSequence,
    orchestra: &StateSequence,
    config: &SamplingConfig,
    granularity: Granularity,
) -> Result<Predictions, Error> {
    check_aligned(piano, orchestra)?;
    if !orchestra.is_empty() && orchestra.dim() != model.orchestra_dim() {
        return Err(Error::dimension("orchestra frame", model.orchestra_dim(), orchestra.dim()));
    }
    let config = SamplingConfig {
        output_mode: OutputMode::MeanField,
        ..config.clone()
    };
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (t, ctx) in teacher_contexts(piano, orchestra, model.horizon, granularity, true) {
        states.push(model.predict_frame(&ctx, &config, &mut rng)?);
        times.push(t);
    }
    Ok(Predictions { times, states })
}
