//! The JSON piano-roll interchange format:
//!
//! ```json
//! { "quantization": 4,
//!   "parts": [ { "name": "violin", "pitches": [62, 64], "frames": [[0, 90], [90, 0]] } ] }
//! ```
//!
//! `frames` is row-major with one row per entry of `pitches`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{PianoRoll, ScoreError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorePart {
    pub name: String,
    pub pitches: Vec<u8>,
    pub frames: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreFile {
    pub quantization: u32,
    pub parts: Vec<ScorePart>,
}

impl ScoreFile {
    pub fn from_rolls(rolls: &[PianoRoll]) -> Result<Self, ScoreError> {
        let quantization = rolls.first().map_or(1, PianoRoll::quantization);
        if let Some(r) = rolls.iter().find(|r| r.quantization() != quantization) {
            return Err(ScoreError::QuantizationMismatch {
                piano: quantization,
                orchestra: r.quantization(),
                part: r.label().to_string(),
            });
        }
        let parts = rolls
            .iter()
            .map(|r| ScorePart {
                name: r.label().to_string(),
                pitches: r.pitches().to_vec(),
                frames: r.frames().rows().into_iter().map(|row| row.to_vec()).collect(),
            })
            .collect();
        Ok(Self {
            quantization,
            parts,
        })
    }

    pub fn into_rolls(self) -> Result<Vec<PianoRoll>, ScoreError> {
        let q = self.quantization;
        self.parts
            .into_iter()
            .map(|part| {
                let n_frames = part.frames.first().map_or(0, Vec::len);
                if part.frames.len() != part.pitches.len() {
                    return Err(ScoreError::InvalidRoll(format!(
                        "`{}`: {} frame rows for {} pitches",
                        part.name,
                        part.frames.len(),
                        part.pitches.len()
                    )));
                }
                if part.frames.iter().any(|row| row.len() != n_frames) {
                    return Err(ScoreError::InvalidRoll(format!(
                        "`{}`: ragged frame rows",
                        part.name
                    )));
                }
                let flat: Vec<u8> = part.frames.into_iter().flatten().collect();
                let frames = Array2::from_shape_vec((part.pitches.len(), n_frames), flat)
                    .expect("row lengths checked");
                PianoRoll::new(part.name, part.pitches, frames, q)
            })
            .collect()
    }
}

pub fn parse_score_json(text: &str) -> Result<Vec<PianoRoll>, ScoreError> {
    serde_json::from_str::<ScoreFile>(text)?.into_rolls()
}

pub fn score_to_json(rolls: &[PianoRoll]) -> Result<String, ScoreError> {
    Ok(serde_json::to_string(&ScoreFile::from_rolls(rolls)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_the_documented_example() {
        let text = r#"{ "quantization": 4,
            "parts": [ { "name": "violin", "pitches": [62, 64], "frames": [[0, 90], [90, 0]] } ] }"#;
        let rolls = parse_score_json(text).unwrap();
        assert_eq!(rolls.len(), 1);
        assert_eq!(rolls[0].intensity(62, 1), 90);
        assert_eq!(rolls[0].intensity(64, 0), 90);
        assert_eq!(rolls[0].n_frames(), 2);
    }

    #[test]
    fn rejects_bad_rolls() {
        let ragged = r#"{"quantization":4,"parts":[{"name":"a","pitches":[1,2],"frames":[[0],[0,0]]}]}"#;
        assert!(parse_score_json(ragged).is_err());
        let loud = r#"{"quantization":4,"parts":[{"name":"a","pitches":[1],"frames":[[200]]}]}"#;
        assert!(parse_score_json(loud).is_err());
        let unsorted = r#"{"quantization":4,"parts":[{"name":"a","pitches":[3,2],"frames":[[0],[0]]}]}"#;
        assert!(parse_score_json(unsorted).is_err());
        let zero_q = r#"{"quantization":0,"parts":[{"name":"a","pitches":[],"frames":[]}]}"#;
        assert!(parse_score_json(zero_q).is_err());
    }

    fn arb_roll() -> impl Strategy<Value = PianoRoll> {
        (
            prop::collection::btree_set(0u8..128, 1..6),
            0usize..12,
            1u32..9,
        )
            .prop_flat_map(|(pitches, n, q)| {
                let pitches: Vec<u8> = pitches.into_iter().collect();
                let cells = pitches.len() * n;
                (
                    Just(pitches),
                    Just(n),
                    Just(q),
                    prop::collection::vec(0u8..128, cells),
                )
            })
            .prop_map(|(pitches, n, q, cells)| {
                let frames = Array2::from_shape_vec((pitches.len(), n), cells).unwrap();
                PianoRoll::new("part", pitches, frames, q).unwrap()
            })
    }

    proptest! {
        #[test]
        fn json_round_trip(roll in arb_roll()) {
            let text = score_to_json(std::slice::from_ref(&roll)).unwrap();
            let back = parse_score_json(&text).unwrap();
            prop_assert_eq!(back, vec![roll]);
        }
    }
}
