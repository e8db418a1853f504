//! Prediction accuracy, naive baselines and diagnostics.
//!
//! Accuracy pools true positives, false positives and false negatives over
//! every evaluated index before dividing: `100 · TP / (TP + FP + FN)`.

use std::ops::AddAssign;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ebm::SamplingConfig;
use crate::error::Error;
use crate::projection::{evaluation_times, teacher_forced_predict, Granularity, OrchestrationModel, Predictions};
use crate::score_io::{AlignedPair, StateSequence};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Tally {
    /// Counts for one predicted frame against its truth.
    pub fn of(truth: &Array1<f64>, pred: &Array1<f64>) -> Self {
        let mut t = Tally::default();
        for (&a, &b) in truth.iter().zip(pred.iter()) {
            match (a > 0.5, b > 0.5) {
                (true, true) => t.tp += 1,
                (false, true) => t.fp += 1,
                (true, false) => t.fn_ += 1,
                (false, false) => {}
            }
        }
        t
    }

    /// Percent accuracy; 100 when there is nothing to find and nothing was
    /// predicted.
    pub fn accuracy_percent(&self) -> f64 {
        let denom = self.tp + self.fp + self.fn_;
        if denom == 0 {
            100.0
        } else {
            100.0 * self.tp as f64 / denom as f64
        }
    }
}

impl AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

impl std::iter::Sum for Tally {
    fn sum<I: Iterator<Item = Tally>>(iter: I) -> Self {
        let mut total = Tally::default();
        iter.for_each(|t| total += t);
        total
    }
}

/// Pooled accuracy of one predictor over one set of sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub model: String,
    pub granularity: Granularity,
    #[serde(rename = "Q")]
    pub quantization: u32,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy_percent: f64,
    /// Per evaluated index, in evaluation order.
    #[serde(skip)]
    pub per_index: Vec<Tally>,
}

impl AccuracyReport {
    pub fn from_tallies(model: impl Into<String>, granularity: Granularity, quantization: u32, per_index: Vec<Tally>) -> Self {
        let total: Tally = per_index.iter().copied().sum();
        Self {
            model: model.into(),
            granularity,
            quantization,
            tp: total.tp,
            fp: total.fp,
            fn_: total.fn_,
            accuracy_percent: total.accuracy_percent(),
            per_index,
        }
    }

    pub fn total(&self) -> Tally {
        Tally {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }

    pub fn with_labels(self, model: impl Into<String>, granularity: Granularity, quantization: u32) -> Self {
        Self {
            model: model.into(),
            granularity,
            quantization,
            ..self
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        format!(
            "| model | granularity | Q | TP | FP | FN | accuracy (%) |\n\
             |---|---|---|---|---|---|---|\n\
             | {} | {} | {} | {} | {} | {} | {:.2} |\n",
            self.model, self.granularity, self.quantization, self.tp, self.fp, self.fn_, self.accuracy_percent
        )
    }
}

/// Pooled accuracy of `pred` against `truth`, index by index.
pub fn accuracy(truth: &[Array1<f64>], pred: &[Array1<f64>]) -> Result<AccuracyReport, Error> {
    if truth.len() != pred.len() {
        return Err(Error::dimension("predicted frames", truth.len(), pred.len()));
    }
    let mut per_index = Vec::with_capacity(truth.len());
    for (t, p) in truth.iter().zip(pred) {
        if t.len() != p.len() {
            return Err(Error::dimension("predicted frame", t.len(), p.len()));
        }
        per_index.push(Tally::of(t, p));
    }
    Ok(AccuracyReport::from_tallies("", Granularity::Frame, 0, per_index))
}

/// A frame of i.i.d. Bernoulli(0.5) notes.
pub fn baseline_random(dim: usize, rng: &mut impl Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(dim, || if rng.random::<bool>() { 1.0 } else { 0.0 })
}

/// The previous truth frame, or silence at the start.
pub fn baseline_repeat(previous: Option<&Array1<f64>>, dim: usize) -> Array1<f64> {
    previous.cloned().unwrap_or_else(|| Array1::zeros(dim))
}

/// Anything that predicts the orchestra at the evaluation indices of a pair.
pub trait Predictor {
    fn id(&self) -> String;

    fn predict(
        &mut self,
        piano: &StateSequence,
        orchestra: &StateSequence,
        granularity: Granularity,
    ) -> Result<Predictions, Error>;
}

/// Teacher-forced predictions of a trained model.
pub struct ModelPredictor<'a> {
    pub id: String,
    pub model: &'a OrchestrationModel,
    pub sampling: SamplingConfig,
}

impl<'a> ModelPredictor<'a> {
    pub fn new(id: impl Into<String>, model: &'a OrchestrationModel, sampling: SamplingConfig) -> Self {
        Self {
            id: id.into(),
            model,
            sampling,
        }
    }
}

impl Predictor for ModelPredictor<'_> {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn predict(&mut self, piano: &StateSequence, orchestra: &StateSequence, granularity: Granularity) -> Result<Predictions, Error> {
        teacher_forced_predict(self.model, piano, orchestra, &self.sampling, granularity)
    }
}

pub struct RandomBaseline {
    rng: ChaCha8Rng,
}

impl RandomBaseline {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Predictor for RandomBaseline {
    fn id(&self) -> String {
        "random".into()
    }

    fn predict(&mut self, _piano: &StateSequence, orchestra: &StateSequence, granularity: Granularity) -> Result<Predictions, Error> {
        let times = evaluation_times(orchestra, granularity);
        let states = times.iter().map(|_| baseline_random(orchestra.dim(), &mut self.rng)).collect();
        Ok(Predictions { times, states })
    }
}

/// Predicts `O(t − 1)`. At event granularity that is the previous event's
/// state, since nothing changes between events.
pub struct RepeatBaseline;

impl Predictor for RepeatBaseline {
    fn id(&self) -> String {
        "repeat".into()
    }

    fn predict(&mut self, _piano: &StateSequence, orchestra: &StateSequence, granularity: Granularity) -> Result<Predictions, Error> {
        let times = evaluation_times(orchestra, granularity);
        let states = times
            .iter()
            .map(|&t| baseline_repeat(t.checked_sub(1).and_then(|p| orchestra.get(p)), orchestra.dim()))
            .collect();
        Ok(Predictions { times, states })
    }
}

/// Pooled accuracy of `predictor` over `pairs`.
pub fn evaluate(
    predictor: &mut dyn Predictor,
    pairs: &[AlignedPair],
    granularity: Granularity,
    quantization: u32,
) -> Result<AccuracyReport, Error> {
    if pairs.is_empty() {
        return Err(Error::Corpus("nothing to evaluate: the split is empty".into()));
    }
    let mut per_index = Vec::new();
    for pair in pairs {
        let preds = predictor.predict(&pair.piano, &pair.orchestra, granularity)?;
        let truth: Vec<_> = preds.times.iter().map(|&t| pair.orchestra.states()[t].clone()).collect();
        per_index.extend(accuracy(&truth, &preds.states)?.per_index);
    }
    Ok(AccuracyReport::from_tallies(predictor.id(), granularity, quantization, per_index))
}

/// Teacher-forced evaluation of a trained model.
pub fn evaluate_model(
    model: &OrchestrationModel,
    id: &str,
    pairs: &[AlignedPair],
    granularity: Granularity,
    sampling: &SamplingConfig,
) -> Result<AccuracyReport, Error> {
    let mut p = ModelPredictor::new(id, model, sampling.clone());
    evaluate(&mut p, pairs, granularity, model.quantization)
}

/// Accuracy with the real piano, then with every piano frame silenced.
pub fn corrupted_piano_eval(
    predictor: &mut dyn Predictor,
    pairs: &[AlignedPair],
    granularity: Granularity,
    quantization: u32,
) -> Result<(AccuracyReport, AccuracyReport), Error> {
    let normal = evaluate(predictor, pairs, granularity, quantization)?;
    let corrupted: Vec<AlignedPair> = pairs
        .iter()
        .map(|p| AlignedPair {
            piano: p.piano.silenced(),
            ..p.clone()
        })
        .collect();
    let corrupt = evaluate(predictor, &corrupted, granularity, quantization)?;
    Ok((normal, corrupt))
}

/// Expected pooled accuracy of the Bernoulli(0.5) baseline: each index with
/// `d` true notes out of `D` expects `d/2` hits, `(D − d)/2` false alarms and
/// `d/2` misses, so the pooled ratio is `Σd / (ΣD + Σd)`.
pub fn expected_random_accuracy(pairs: &[AlignedPair], granularity: Granularity) -> f64 {
    let (mut notes, mut dims) = (0.0, 0.0);
    for p in pairs {
        for t in evaluation_times(&p.orchestra, granularity) {
            notes += p.orchestra.states()[t].sum();
            dims += p.orchestra.dim() as f64;
        }
    }
    if dims + notes == 0.0 {
        return 0.0;
    }
    100.0 * notes / (dims + notes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub granularity: Granularity,
    #[serde(rename = "Q")]
    pub quantization: u32,
    pub accuracy_percent: f64,
}

/// Repeat-baseline accuracy per quantization, plus the event-level value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub frame_rows: Vec<BiasRow>,
    pub event_row: BiasRow,
}

impl BiasReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| granularity | Q | repeat accuracy (%) |\n|---|---|---|\n");
        for r in self.frame_rows.iter().chain(std::iter::once(&self.event_row)) {
            s.push_str(&format!("| {} | {} | {:.2} |\n", r.granularity, r.quantization, r.accuracy_percent));
        }
        s
    }
}

/// `corpora` holds the same corpus rendered at each quantization. The event
/// row is measured on the first rendering.
pub fn bias_report(corpora: &[(u32, Vec<AlignedPair>)]) -> Result<BiasReport, Error> {
    let Some((first_q, first)) = corpora.first() else {
        return Err(Error::Corpus("no quantizations given".into()));
    };
    let frame_rows = corpora
        .iter()
        .map(|(q, pairs)| {
            let r = evaluate(&mut RepeatBaseline, pairs, Granularity::Frame, *q)?;
            Ok(BiasRow {
                granularity: Granularity::Frame,
                quantization: *q,
                accuracy_percent: r.accuracy_percent,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let event = evaluate(&mut RepeatBaseline, first, Granularity::Event, *first_q)?;
    Ok(BiasReport {
        frame_rows,
        event_row: BiasRow {
            granularity: Granularity::Event,
            quantization: *first_q,
            accuracy_percent: event.accuracy_percent,
        },
    })
}
