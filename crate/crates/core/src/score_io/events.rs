use ndarray::Array1;

use super::StateSequence;

/// Frames at which the state changes, with the states reached there.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    pub times: Vec<usize>,
    pub states: Vec<Array1<f64>>,
}

impl EventSequence {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Keeps every frame whose state differs from the previous frame.
///
/// Frame 0 has no predecessor and is kept iff `include_first`.
pub fn extract_events(seq: &StateSequence, include_first: bool) -> EventSequence {
    let states = seq.states();
    let mut times = Vec::new();
    for t in 0..states.len() {
        let is_event = if t == 0 {
            include_first
        } else {
            states[t] != states[t - 1]
        };
        if is_event {
            times.push(t);
        }
    }
    let states = times.iter().map(|&t| states[t].clone()).collect();
    EventSequence { times, states }
}
