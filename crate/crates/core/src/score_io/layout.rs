use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{PianoRoll, ScoreError};

/// One orchestral part and the pitches it contributes to the state vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutPart {
    pub name: String,
    /// Every pitch the part's rolls declare.
    pub range: Vec<u8>,
    /// Pitches retained after trimming, strictly increasing.
    pub kept: Vec<u8>,
}

/// Concatenation order of the orchestral parts.
///
/// The part order defines what each coordinate of an orchestra state means,
/// so it is stored with every trained model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrchestraLayout {
    parts: Vec<LayoutPart>,
    total_dim: usize,
}

impl OrchestraLayout {
    pub fn new(parts: Vec<LayoutPart>) -> Self {
        let total_dim = parts.iter().map(|p| p.kept.len()).sum();
        Self { parts, total_dim }
    }

    pub fn parts(&self) -> &[LayoutPart] {
        &self.parts
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Dimension before trimming.
    pub fn untrimmed_dim(&self) -> usize {
        self.parts.iter().map(|p| p.range.len()).sum()
    }

    fn offset(&self, part: usize) -> usize {
        self.parts[..part].iter().map(|p| p.kept.len()).sum()
    }

    /// State-vector coordinate of `pitch` in part `name`.
    pub fn index_of(&self, name: &str, pitch: u8) -> Option<usize> {
        let part = self.parts.iter().position(|p| p.name == name)?;
        let within = self.parts[part].kept.binary_search(&pitch).ok()?;
        Some(self.offset(part) + within)
    }

    /// Binary orchestra states for `length` frames. Parts of `rolls` sharing a
    /// name are merged; pitches outside the kept set are dropped.
    pub fn encode(&self, rolls: &[PianoRoll], length: usize) -> Vec<Array1<f64>> {
        let mut states = vec![Array1::zeros(self.total_dim); length];
        let mut dropped = 0usize;
        let mut offset = 0;
        for part in &self.parts {
            for roll in rolls.iter().filter(|r| r.label() == part.name) {
                for (row, &pitch) in roll.pitches().iter().enumerate() {
                    let kept = part.kept.binary_search(&pitch);
                    for t in 0..roll.n_frames().min(length) {
                        if roll.intensity_at(row, t) == 0 {
                            continue;
                        }
                        match kept {
                            Ok(k) => states[t][offset + k] = 1.0,
                            Err(_) => dropped += 1,
                        }
                    }
                }
            }
            offset += part.kept.len();
        }
        let unknown: Vec<&str> = rolls
            .iter()
            .map(PianoRoll::label)
            .filter(|l| !self.parts.iter().any(|p| p.name == *l))
            .collect();
        if !unknown.is_empty() {
            log::warn!("parts {unknown:?} are not in the layout and were ignored");
        }
        if dropped > 0 {
            log::warn!("{dropped} note-frames on trimmed pitches were dropped");
        }
        states
    }

    /// Sounding pitches of each part for one state vector, in layout order.
    pub fn decode(&self, state: &Array1<f64>) -> Vec<(String, Vec<u8>)> {
        let mut offset = 0;
        self.parts
            .iter()
            .map(|part| {
                let pitches = part
                    .kept
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| state[offset + k] > 0.5)
                    .map(|(_, &p)| p)
                    .collect();
                offset += part.kept.len();
                (part.name.clone(), pitches)
            })
            .collect()
    }

    /// Renders orchestra states back into one roll per part (kept pitches
    /// only), writing `velocity` for sounding notes.
    pub fn to_rolls(&self, states: &[Array1<f64>], quantization: u32, velocity: u8) -> Vec<PianoRoll> {
        let mut offset = 0;
        self.parts
            .iter()
            .map(|part| {
                let mut frames = Array2::zeros((part.kept.len(), states.len()));
                for (t, s) in states.iter().enumerate() {
                    for k in 0..part.kept.len() {
                        if s[offset + k] > 0.5 {
                            frames[[k, t]] = velocity;
                        }
                    }
                }
                offset += part.kept.len();
                PianoRoll::new(part.name.clone(), part.kept.clone(), frames, quantization)
                    .expect("kept pitches are strictly increasing")
            })
            .collect()
    }
}

/// Builds the layout of a corpus of orchestrations.
///
/// Parts are ordered by first appearance across the corpus; each part keeps
/// exactly the pitches that sound at least once somewhere in the corpus.
pub fn build_layout(corpus: &[Vec<PianoRoll>]) -> Result<OrchestraLayout, ScoreError> {
    if corpus.is_empty() {
        return Err(ScoreError::EmptyCorpus);
    }
    let mut names: Vec<String> = Vec::new();
    let mut ranges: Vec<BTreeSet<u8>> = Vec::new();
    let mut played: Vec<BTreeSet<u8>> = Vec::new();
    for roll in corpus.iter().flatten() {
        let idx = match names.iter().position(|n| n == roll.label()) {
            Some(i) => i,
            None => {
                names.push(roll.label().to_string());
                ranges.push(BTreeSet::new());
                played.push(BTreeSet::new());
                names.len() - 1
            }
        };
        ranges[idx].extend(roll.pitches().iter().copied());
        played[idx].extend(roll.played_pitches());
    }
    let parts = names
        .into_iter()
        .zip(ranges)
        .zip(played)
        .map(|((name, range), kept)| {
            if kept.is_empty() {
                log::warn!("part `{name}` never plays in the corpus; it contributes no dimensions");
            }
            LayoutPart {
                name,
                range: range.into_iter().collect(),
                kept: kept.into_iter().collect(),
            }
        })
        .collect();
    Ok(OrchestraLayout::new(parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roll(name: &str, notes: &[(u8, usize)], n_frames: usize) -> PianoRoll {
        let mut r = PianoRoll::silent(name, n_frames, 4);
        for &(p, t) in notes {
            r.fill(p, t, t + 1, 90);
        }
        r
    }

    #[test]
    fn trims_to_played_pitches() {
        let corpus = vec![
            vec![roll("violin", &[(62, 0)], 4), roll("cello", &[], 4)],
            vec![roll("violin", &[(64, 1), (62, 2)], 4)],
        ];
        let layout = build_layout(&corpus).unwrap();
        assert_eq!(layout.parts()[0].kept, vec![62, 64]);
        assert_eq!(layout.parts()[1].name, "cello");
        assert!(layout.parts()[1].kept.is_empty());
        assert_eq!(layout.total_dim(), 2);
        assert_eq!(layout.untrimmed_dim(), 256);
        assert_eq!(layout.index_of("violin", 64), Some(1));
    }

    #[test]
    fn full_range_means_no_trimming() {
        let all: Vec<(u8, usize)> = (0..=127).map(|p| (p, 0)).collect();
        let corpus = vec![vec![roll("a", &all, 1), roll("b", &all, 1)]];
        let layout = build_layout(&corpus).unwrap();
        assert_eq!(layout.total_dim(), layout.untrimmed_dim());
        assert_eq!(layout.total_dim(), 256);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(build_layout(&[]), Err(ScoreError::EmptyCorpus)));
    }

    #[test]
    fn deterministic_in_corpus_content() {
        let corpus = vec![vec![roll("flute", &[(80, 0)], 2), roll("horn", &[(50, 1)], 2)]];
        assert_eq!(build_layout(&corpus).unwrap(), build_layout(&corpus.clone()).unwrap());
    }

    #[test]
    fn encode_decode_agree() {
        let corpus = vec![vec![roll("violin", &[(62, 0), (64, 1)], 3), roll("flute", &[(80, 1)], 3)]];
        let layout = build_layout(&corpus).unwrap();
        let states = layout.encode(&corpus[0], 3);
        assert_eq!(states[1].to_vec(), vec![0.0, 1.0, 1.0]);
        let decoded = layout.decode(&states[1]);
        assert_eq!(decoded[0], ("violin".to_string(), vec![64]));
        assert_eq!(decoded[1], ("flute".to_string(), vec![80]));
        assert!(states[2].iter().all(|&v| v == 0.0));

        let rolls = layout.to_rolls(&states, 4, 100);
        assert_eq!(layout.encode(&rolls, 3), states);
    }
}
