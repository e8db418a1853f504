//! A synthetic piano/orchestra corpus with a known, learnable orchestration.
//!
//! The piano plays chords drawn from [`PIANO_POOL`]. Each rule set maps the
//! sounding piano notes to orchestral notes:
//!
//! - `register-split`: a note `p < 60` is doubled by cello at `p` and bassoon
//!   at `p − 12`; a note `p ≥ 60` by violin at `p` and flute at `p + 12`.
//! - `sustained-chord`: register-split, plus a horn holding the lowest note of
//!   the latest chord, through rests, until the next chord.
//!
//! Durations are whole sixteenths (register-split) or whole quarters
//! (sustained-chord), so a file renders exactly at any quantization that is a
//! multiple of 4, and the sustained corpus at any quantization at all.

use std::ops::RangeInclusive;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::corpus::CorpusEntry;
use crate::error::Error;
use crate::eval::Predictor;
use crate::projection::{evaluation_times, Granularity, Predictions};
use crate::score_io::{piano_pitches, OrchestraLayout, PianoRoll, StateSequence};

pub const PIANO_POOL: RangeInclusive<u8> = 48..=71;
const SPLIT_POINT: u8 = 60;
const ORCH_VELOCITY: u8 = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSet {
    RegisterSplit,
    SustainedChord,
}

impl std::str::FromStr for RuleSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "register-split" => Ok(RuleSet::RegisterSplit),
            "sustained-chord" => Ok(RuleSet::SustainedChord),
            other => Err(Error::Config(format!(
                "unknown rule set `{other}` (expected register-split or sustained-chord)"
            ))),
        }
    }
}

impl RuleSet {
    /// Orchestral parts with the pitches each can receive, in layout order.
    pub fn parts(self) -> Vec<(&'static str, RangeInclusive<u8>)> {
        let mut parts = vec![
            ("violin", 60..=71),
            ("flute", 72..=83),
            ("cello", 48..=59),
            ("bassoon", 36..=47),
        ];
        if self == RuleSet::SustainedChord {
            parts.push(("horn", 48..=71));
        }
        parts
    }

    /// Orchestral notes for the sounding piano notes `chord`.
    /// `held` is the horn note carried over from earlier frames; it is
    /// updated in place.
    pub fn orchestrate(self, chord: &[u8], held: &mut Option<u8>) -> Vec<(&'static str, u8)> {
        let mut out = Vec::with_capacity(chord.len() * 2 + 1);
        for &p in chord {
            if p < SPLIT_POINT {
                out.push(("cello", p));
                out.push(("bassoon", p - 12));
            } else {
                out.push(("violin", p));
                out.push(("flute", p + 12));
            }
        }
        if self == RuleSet::SustainedChord {
            if let Some(&low) = chord.iter().min() {
                *held = Some(low);
            }
            if let Some(h) = *held {
                out.push(("horn", h));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub rule_set: RuleSet,
    pub n_files: usize,
    /// File length in quarter notes.
    pub length: usize,
    /// Mean notes per chord (Poisson); a draw of 0 is a rest.
    pub density: f64,
    pub seed: u64,
    pub quantization: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rule_set: RuleSet::RegisterSplit,
            n_files: 40,
            length: 32,
            density: 1.5,
            seed: 0,
            quantization: 4,
        }
    }
}

/// Chord durations in sixteenths.
fn durations(rule: RuleSet) -> &'static [usize] {
    match rule {
        RuleSet::RegisterSplit => &[1, 2, 2, 3, 4, 4, 6, 8],
        RuleSet::SustainedChord => &[4, 8, 8, 12, 16],
    }
}

/// Generates `n_files` pairs. Equal configs give equal corpora; file `i` only
/// depends on `(seed, i)`, so corpora rendered at different quantizations
/// hold the same music.
pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<Vec<CorpusEntry>, Error> {
    if !(config.density.is_finite() && config.density >= 0.0) {
        return Err(Error::Config(format!("density {} must be non-negative", config.density)));
    }
    let q = config.quantization as usize;
    if q == 0 || durations(config.rule_set).iter().any(|d| d * q % 4 != 0) {
        return Err(Error::Config(format!(
            "{:?} durations do not fall on frames at Q={q}",
            config.rule_set
        )));
    }
    let poisson = (config.density > 0.0).then(|| Poisson::new(config.density).expect("positive rate"));
    (0..config.n_files)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            generate_file(config, i, poisson.as_ref(), &mut rng)
        })
        .collect()
}

fn generate_file(
    config: &SynthConfig,
    index: usize,
    poisson: Option<&Poisson<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<CorpusEntry, Error> {
    let q = config.quantization as usize;
    let total16 = config.length * 4;
    let n_frames = total16 * q / 4;
    let pool: Vec<u8> = PIANO_POOL.collect();
    let parts = config.rule_set.parts();

    let mut piano = Array2::<u8>::zeros((pool.len(), n_frames));
    let mut orch: Vec<Array2<u8>> = parts.iter().map(|(_, r)| Array2::zeros((r.clone().count(), n_frames))).collect();
    let mut held = None;
    let mut pos16 = 0;
    while pos16 < total16 {
        let dur = durations(config.rule_set)[rng.random_range(0..durations(config.rule_set).len())];
        let k = poisson.map_or(0, |p| (p.sample(rng) as usize).min(pool.len()));
        let mut chord: Vec<u8> = sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
        chord.sort_unstable();
        let velocity = rng.random_range(64..=100u8);
        let start = pos16 * q / 4;
        let end = ((pos16 + dur).min(total16)) * q / 4;
        let notes = config.rule_set.orchestrate(&chord, &mut held);
        for t in start..end {
            for &p in &chord {
                piano[[(p - pool[0]) as usize, t]] = velocity;
            }
            for &(name, p) in &notes {
                let part = parts.iter().position(|(n, _)| *n == name).expect("rule emits known parts");
                let row = (p - parts[part].1.start()) as usize;
                orch[part][[row, t]] = ORCH_VELOCITY;
            }
        }
        pos16 += dur;
    }

    let piano = PianoRoll::new("piano", pool, piano, config.quantization)?;
    let orchestra = parts
        .iter()
        .zip(orch)
        .map(|((name, range), frames)| PianoRoll::new(*name, range.clone().collect(), frames, config.quantization))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorpusEntry {
        name: format!("synth_{index:03}"),
        piano: vec![piano],
        orchestra,
    })
}

/// Applies the rule itself as a teacher-forced predictor; the held horn note
/// is read from the true previous frame.
pub struct RulePredictor {
    pub rule: RuleSet,
    pub layout: OrchestraLayout,
}

impl RulePredictor {
    fn held_from(&self, previous: Option<&Array1<f64>>) -> Option<u8> {
        let prev = previous?;
        self.layout
            .decode(prev)
            .into_iter()
            .find(|(name, _)| name == "horn")
            .and_then(|(_, pitches)| pitches.first().copied())
    }
}

impl Predictor for RulePredictor {
    fn id(&self) -> String {
        "rule".into()
    }

    fn predict(&mut self, piano: &StateSequence, orchestra: &StateSequence, granularity: Granularity) -> Result<Predictions, Error> {
        let times = evaluation_times(orchestra, granularity);
        let states = times
            .iter()
            .map(|&t| {
                let mut held = self.held_from(t.checked_sub(1).and_then(|p| orchestra.get(p)));
                let chord = piano_pitches(&piano.states()[t]);
                let mut state = Array1::zeros(self.layout.total_dim());
                for (name, p) in self.rule.orchestrate(&chord, &mut held) {
                    if let Some(i) = self.layout.index_of(name, p) {
                        state[i] = 1.0;
                    }
                }
                state
            })
            .collect();
        Ok(Predictions { times, states })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate;
    use crate::trainer::corpus::{align_all, layout_of};

    #[test]
    fn register_split_rule() {
        let mut held = None;
        let mut notes = RuleSet::RegisterSplit.orchestrate(&[55, 62], &mut held);
        notes.sort();
        assert_eq!(notes, vec![("bassoon", 43), ("cello", 55), ("flute", 74), ("violin", 62)]);
    }

    #[test]
    fn horn_holds_through_rests() {
        let mut held = None;
        assert!(RuleSet::SustainedChord.orchestrate(&[], &mut held).is_empty());
        assert!(RuleSet::SustainedChord.orchestrate(&[64, 50], &mut held).contains(&("horn", 50)));
        assert_eq!(RuleSet::SustainedChord.orchestrate(&[], &mut held), vec![("horn", 50)]);
    }

    #[test]
    fn zero_density_is_silent() {
        let cfg = SynthConfig { density: 0.0, n_files: 3, ..Default::default() };
        for e in generate_synthetic_corpus(&cfg).unwrap() {
            assert!(e.piano.iter().chain(&e.orchestra).all(|r| r.played_pitches().is_empty()));
            assert_eq!(e.piano[0].n_frames(), 32 * 4);
        }
    }

    #[test]
    fn deterministic_and_layout_is_48_wide() {
        let cfg = SynthConfig { n_files: 12, ..Default::default() };
        let a = generate_synthetic_corpus(&cfg).unwrap();
        assert_eq!(a, generate_synthetic_corpus(&cfg).unwrap());
        assert_eq!(layout_of(&a).unwrap().total_dim(), 48);
    }

    #[test]
    fn rejects_unrepresentable_quantization() {
        let cfg = SynthConfig { quantization: 6, ..Default::default() };
        assert!(generate_synthetic_corpus(&cfg).is_err());
        let sustained = SynthConfig { quantization: 3, rule_set: RuleSet::SustainedChord, ..Default::default() };
        assert!(generate_synthetic_corpus(&sustained).is_ok());
        assert!("nope".parse::<RuleSet>().is_err());
    }

    #[test]
    fn same_music_at_every_quantization() {
        let base = SynthConfig { n_files: 2, ..Default::default() };
        let q4 = generate_synthetic_corpus(&base).unwrap();
        let q8 = generate_synthetic_corpus(&SynthConfig { quantization: 8, ..base }).unwrap();
        for (a, b) in q4.iter().zip(&q8) {
            for t in 0..a.piano[0].n_frames() {
                for &p in a.piano[0].pitches() {
                    assert_eq!(a.piano[0].intensity(p, t) > 0, b.piano[0].intensity(p, 2 * t) > 0);
                }
            }
        }
    }

    #[test]
    fn rule_predictor_is_a_perfect_oracle() {
        for rule in [RuleSet::RegisterSplit, RuleSet::SustainedChord] {
            let cfg = SynthConfig { rule_set: rule, n_files: 5, ..Default::default() };
            let corpus = generate_synthetic_corpus(&cfg).unwrap();
            let layout = layout_of(&corpus).unwrap();
            let pairs = align_all(&corpus, &layout).unwrap();
            let mut oracle = RulePredictor { rule, layout };
            for g in [Granularity::Event, Granularity::Frame] {
                let r = evaluate(&mut oracle, &pairs, g, 4).unwrap();
                assert_eq!(r.accuracy_percent, 100.0, "{rule:?} {g}");
            }
        }
    }
}
