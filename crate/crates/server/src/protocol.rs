//! JSON messages exchanged over `/session`.

use std::collections::BTreeMap;

use lop_core::ebm::SamplingConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Inbound {
    NoteOn {
        pitch: u8,
        #[serde(default = "default_velocity")]
        velocity: u8,
        #[serde(default)]
        pulse: bool,
    },
    NoteOff {
        pitch: u8,
    },
    /// Replaces the whole piano vector.
    PianoFrame {
        pitches: Vec<u8>,
        #[serde(default)]
        pulse: bool,
    },
    Pulse,
    SetModel {
        model_id: String,
    },
    /// Fields left out keep their current value.
    SetSampling {
        gibbs_steps: Option<usize>,
        threshold: Option<f64>,
        seed: Option<u64>,
    },
    Reset,
}

fn default_velocity() -> u8 {
    80
}

impl Inbound {
    /// Whether the message asks for a tick once applied.
    pub fn pulses(&self) -> bool {
        match self {
            Inbound::NoteOn { pulse, .. } | Inbound::PianoFrame { pulse, .. } => *pulse,
            Inbound::Pulse => true,
            _ => false,
        }
    }

    /// Notes and pulses, as opposed to controls.
    pub fn is_performance(&self) -> bool {
        matches!(
            self,
            Inbound::NoteOn { .. } | Inbound::NoteOff { .. } | Inbound::PianoFrame { .. } | Inbound::Pulse
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    OrchestraFrame {
        frame: u64,
        model_id: String,
        /// Every part of the layout, with its sounding pitches.
        parts: BTreeMap<String, Vec<u8>>,
        latency_ms: f64,
        over_budget: bool,
    },
    Ack {
        request: String,
        model_id: Option<String>,
        sampling: SamplingConfig,
    },
    Warning {
        detail: String,
    },
    Error {
        detail: String,
    },
}

impl Outbound {
    pub fn error(detail: impl Into<String>) -> Self {
        Outbound::Error { detail: detail.into() }
    }

    pub fn warning(detail: impl Into<String>) -> Self {
        Outbound::Warning { detail: detail.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outbound messages serialize")
    }
}

/// Parses one text frame; the error text is meant for an `error` reply.
pub fn parse_inbound(text: &str) -> Result<Inbound, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
}
