use ndarray::{Array1, Array2};

use super::ScoreError;

/// Pitch × time matrix of note intensities for one part.
///
/// Row `r` holds pitch `pitches[r]`; intensity 0 is a note off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PianoRoll {
    pitches: Vec<u8>,
    frames: Array2<u8>,
    quantization: u32,
    label: String,
}

impl PianoRoll {
    pub fn new(
        label: impl Into<String>,
        pitches: Vec<u8>,
        frames: Array2<u8>,
        quantization: u32,
    ) -> Result<Self, ScoreError> {
        let label = label.into();
        if quantization == 0 {
            return Err(ScoreError::InvalidRoll(format!(
                "`{label}`: quantization must be at least 1"
            )));
        }
        if frames.nrows() != pitches.len() {
            return Err(ScoreError::InvalidRoll(format!(
                "`{label}`: {} rows for {} pitches",
                frames.nrows(),
                pitches.len()
            )));
        }
        if pitches.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ScoreError::InvalidRoll(format!(
                "`{label}`: pitches must be strictly increasing"
            )));
        }
        if let Some(&p) = pitches.iter().find(|&&p| p > 127) {
            return Err(ScoreError::InvalidRoll(format!(
                "`{label}`: pitch {p} is not a MIDI pitch"
            )));
        }
        if frames.iter().any(|&v| v > 127) {
            return Err(ScoreError::InvalidRoll(format!(
                "`{label}`: intensities must lie in 0..=127"
            )));
        }
        Ok(Self {
            pitches,
            frames,
            quantization,
            label,
        })
    }

    /// A silent roll covering the full MIDI range.
    pub fn silent(label: impl Into<String>, n_frames: usize, quantization: u32) -> Self {
        Self::new(
            label,
            (0..=127).collect(),
            Array2::zeros((128, n_frames)),
            quantization,
        )
        .expect("full-range silent roll is valid")
    }

    pub fn pitches(&self) -> &[u8] {
        &self.pitches
    }

    pub fn frames(&self) -> &Array2<u8> {
        &self.frames
    }

    pub fn quantization(&self) -> u32 {
        self.quantization
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_frames(&self) -> usize {
        self.frames.ncols()
    }

    pub fn intensity_at(&self, row: usize, t: usize) -> u8 {
        self.frames[[row, t]]
    }

    /// Intensity of `pitch` at frame `t`; 0 when the pitch is not a row or
    /// `t` lies past the end.
    pub fn intensity(&self, pitch: u8, t: usize) -> u8 {
        match self.pitches.binary_search(&pitch) {
            Ok(row) if t < self.n_frames() => self.frames[[row, t]],
            _ => 0,
        }
    }

    /// Sets `pitch` to `value` over frames `start..end`. The pitch must be a row.
    pub(crate) fn fill(&mut self, pitch: u8, start: usize, end: usize, value: u8) {
        if let Ok(row) = self.pitches.binary_search(&pitch) {
            let end = end.min(self.n_frames());
            for t in start..end {
                self.frames[[row, t]] = value;
            }
        }
    }

    /// Pads with silent frames up to `n_frames` (never truncates).
    pub fn padded_to(&self, n_frames: usize) -> Self {
        if n_frames <= self.n_frames() {
            return self.clone();
        }
        let mut frames = Array2::zeros((self.pitches.len(), n_frames));
        frames
            .slice_mut(ndarray::s![.., ..self.n_frames()])
            .assign(&self.frames);
        Self {
            frames,
            ..self.clone()
        }
    }

    /// Overlays several parts into one roll; the louder intensity wins where
    /// notes coincide.
    pub fn merge(label: impl Into<String>, rolls: &[PianoRoll]) -> Result<Self, ScoreError> {
        let label = label.into();
        let Some(first) = rolls.first() else {
            return Err(ScoreError::InvalidRoll(format!("`{label}`: nothing to merge")));
        };
        let q = first.quantization;
        if let Some(r) = rolls.iter().find(|r| r.quantization != q) {
            return Err(ScoreError::InvalidRoll(format!(
                "`{label}`: part `{}` has Q={}, expected {q}",
                r.label, r.quantization
            )));
        }
        let mut pitches: Vec<u8> = rolls.iter().flat_map(|r| r.pitches.iter().copied()).collect();
        pitches.sort_unstable();
        pitches.dedup();
        let n_frames = rolls.iter().map(PianoRoll::n_frames).max().unwrap_or(0);
        let mut frames = Array2::<u8>::zeros((pitches.len(), n_frames));
        for r in rolls {
            for (row, p) in r.pitches.iter().enumerate() {
                let dst = pitches.binary_search(p).expect("pitch was collected");
                for t in 0..r.n_frames() {
                    let v = &mut frames[[dst, t]];
                    *v = (*v).max(r.frames[[row, t]]);
                }
            }
        }
        Self::new(label, pitches, frames, q)
    }

    /// Pitches sounding at least once.
    pub fn played_pitches(&self) -> Vec<u8> {
        self.pitches
            .iter()
            .enumerate()
            .filter(|(row, _)| self.frames.row(*row).iter().any(|&v| v > 0))
            .map(|(_, &p)| p)
            .collect()
    }
}

/// Time-ordered binary state vectors of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    states: Vec<Array1<f64>>,
    dim: usize,
    quantization: u32,
}

impl StateSequence {
    /// Builds a sequence, binarizing entries (`> 0` becomes 1).
    pub fn new(states: Vec<Array1<f64>>, quantization: u32) -> Result<Self, ScoreError> {
        let dim = states.first().map_or(0, |s| s.len());
        Self::with_dim(states, dim, quantization)
    }

    pub fn with_dim(
        states: Vec<Array1<f64>>,
        dim: usize,
        quantization: u32,
    ) -> Result<Self, ScoreError> {
        if quantization == 0 {
            return Err(ScoreError::InvalidRoll(
                "quantization must be at least 1".into(),
            ));
        }
        if let Some(s) = states.iter().find(|s| s.len() != dim) {
            return Err(ScoreError::InvalidRoll(format!(
                "state of dimension {} in a sequence of dimension {dim}",
                s.len()
            )));
        }
        let states = states
            .into_iter()
            .map(|s| s.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }))
            .collect();
        Ok(Self {
            states,
            dim,
            quantization,
        })
    }

    pub fn states(&self) -> &[Array1<f64>] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn quantization(&self) -> u32 {
        self.quantization
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<&Array1<f64>> {
        self.states.get(t)
    }

    /// The same sequence with every state replaced by silence.
    pub fn silenced(&self) -> Self {
        Self {
            states: vec![Array1::zeros(self.dim); self.states.len()],
            ..self.clone()
        }
    }

    /// Repeats every frame `factor` times, as if re-quantized `factor`× finer.
    pub fn upsampled(&self, factor: usize) -> Self {
        let states = self
            .states
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.clone(), factor))
            .collect();
        Self {
            states,
            dim: self.dim,
            quantization: self.quantization * factor as u32,
        }
    }
}
