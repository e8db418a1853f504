//! Symbolic score ingestion.
//!
//! Scores arrive either as Standard MIDI files or as the JSON piano-roll
//! interchange format, and are turned into quantized [`PianoRoll`]s. A set of
//! orchestral parts is flattened into a single binary state vector per frame
//! through an [`OrchestraLayout`], which drops pitches that never sound
//! anywhere in the corpus.

mod events;
mod json;
mod layout;
mod midi;
mod roll;

pub use events::{extract_events, EventSequence};
pub use json::{parse_score_json, score_to_json, ScoreFile, ScorePart};
pub use layout::{build_layout, LayoutPart, OrchestraLayout};
pub use midi::{parse_midi, write_midi, MidiError};
pub use roll::{PianoRoll, StateSequence};

use ndarray::Array1;
use thiserror::Error;

/// Lowest MIDI pitch of the 88-key keyboard (A0).
pub const PIANO_LOWEST: u8 = 21;
/// Highest MIDI pitch of the 88-key keyboard (C8).
pub const PIANO_HIGHEST: u8 = 108;
/// Dimension of a piano state vector.
pub const PIANO_KEYS: usize = 88;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Midi(#[from] MidiError),
    #[error("invalid piano roll: {0}")]
    InvalidRoll(String),
    #[error("malformed score json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("quantization mismatch: piano has Q={piano}, orchestra part `{part}` has Q={orchestra}")]
    QuantizationMismatch {
        piano: u32,
        orchestra: u32,
        part: String,
    },
    #[error("cannot align an empty score")]
    EmptyScore,
    #[error("empty corpus")]
    EmptyCorpus,
}

/// Maps a MIDI pitch onto the 88-key piano vector, `None` outside A0..=C8.
pub fn piano_key_index(pitch: u8) -> Option<usize> {
    (PIANO_LOWEST..=PIANO_HIGHEST)
        .contains(&pitch)
        .then(|| (pitch - PIANO_LOWEST) as usize)
}

/// Builds a binary 88-vector from a list of sounding MIDI pitches; pitches off
/// the keyboard are dropped.
pub fn piano_state(pitches: &[u8]) -> Array1<f64> {
    let mut state = Array1::zeros(PIANO_KEYS);
    for &p in pitches {
        if let Some(k) = piano_key_index(p) {
            state[k] = 1.0;
        }
    }
    state
}

/// Sounding MIDI pitches of a binary 88-vector.
pub fn piano_pitches(state: &Array1<f64>) -> Vec<u8> {
    state
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(k, _)| PIANO_LOWEST + k as u8)
        .collect()
}

/// A piano score and its orchestration, aligned frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub name: String,
    pub piano: StateSequence,
    pub orchestra: StateSequence,
}

/// Aligns a piano part with its orchestration.
///
/// Both sequences are binarized (intensity > 0 is a sounding note) and padded
/// with silence to the longer of the two. The piano is mapped onto 88 keys,
/// the orchestra onto `layout`.
pub fn align_pair(
    piano: &PianoRoll,
    orchestra: &[PianoRoll],
    layout: &OrchestraLayout,
) -> Result<(StateSequence, StateSequence), ScoreError> {
    for part in orchestra {
        if part.quantization() != piano.quantization() {
            return Err(ScoreError::QuantizationMismatch {
                piano: piano.quantization(),
                orchestra: part.quantization(),
                part: part.label().to_string(),
            });
        }
    }
    let length = orchestra
        .iter()
        .map(PianoRoll::n_frames)
        .chain(std::iter::once(piano.n_frames()))
        .max()
        .unwrap_or(0);
    if length == 0 {
        return Err(ScoreError::EmptyScore);
    }
    let q = piano.quantization();

    let mut clipped = 0usize;
    let piano_states = (0..length)
        .map(|t| {
            let mut state = Array1::zeros(PIANO_KEYS);
            if t < piano.n_frames() {
                for (row, &pitch) in piano.pitches().iter().enumerate() {
                    if piano.intensity_at(row, t) == 0 {
                        continue;
                    }
                    match piano_key_index(pitch) {
                        Some(k) => state[k] = 1.0,
                        None => clipped += 1,
                    }
                }
            }
            state
        })
        .collect();
    if clipped > 0 {
        log::warn!(
            "{clipped} piano note-frames outside the 88-key range were clipped in `{}`",
            piano.label()
        );
    }

    let orchestra_states = layout.encode(orchestra, length);
    Ok((
        StateSequence::new(piano_states, q)?,
        StateSequence::new(orchestra_states, q)?,
    ))
}
