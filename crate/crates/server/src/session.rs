//! Per-connection state and the tick that turns it into an orchestra frame.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use lop_core::ebm::{OutputMode, SamplingConfig};
use lop_core::projection::{OrchestrationModel, ProjectionContext};
use lop_core::score_io::{piano_key_index, PIANO_HIGHEST, PIANO_KEYS, PIANO_LOWEST};
use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::protocol::{Inbound, Outbound};
use crate::registry::ModelRegistry;

/// A parsed message, or the reason a text frame could not be parsed.
pub type Queued = Result<Inbound, String>;

/// Latency budget per tick.
pub const DEFAULT_BUDGET_MS: f64 = 100.0;
const LATENCY_WINDOW: usize = 4096;

/// Compute time of recent ticks.
#[derive(Debug, Clone, Default)]
pub struct LatencyStats {
    recent: VecDeque<f64>,
    count: u64,
    max: f64,
}

impl LatencyStats {
    pub fn record(&mut self, ms: f64) {
        if self.recent.len() == LATENCY_WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back(ms);
        self.count += 1;
        self.max = self.max.max(ms);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Median over the most recent ticks; 0 before the first tick.
    pub fn median(&self) -> f64 {
        if self.recent.is_empty() {
            return 0.0;
        }
        let mut v: Vec<f64> = self.recent.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

struct Active {
    id: String,
    model: Arc<OrchestrationModel>,
}

/// One live session. Messages are applied in arrival order; a tick reads a
/// single snapshot of (model, sampling, piano, past).
pub struct Session {
    registry: Arc<ModelRegistry>,
    active: Option<Active>,
    sampling: SamplingConfig,
    past: VecDeque<Array1<f64>>,
    piano: Array1<f64>,
    frame: u64,
    rng: ChaCha8Rng,
    latency: LatencyStats,
    budget_ms: f64,
}

impl Session {
    /// Starts on the registry's default model with silent past and piano.
    pub fn new(registry: Arc<ModelRegistry>, sampling: SamplingConfig) -> Self {
        let active = registry.default_id().map(|id| Active {
            id: id.to_string(),
            model: registry.get(id).expect("default id is registered"),
        });
        let rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        let mut session = Self {
            registry,
            active,
            sampling,
            past: VecDeque::new(),
            piano: Array1::zeros(PIANO_KEYS),
            frame: 0,
            rng,
            latency: LatencyStats::default(),
            budget_ms: DEFAULT_BUDGET_MS,
        };
        session.clear_past();
        session
    }

    pub fn with_budget_ms(mut self, budget_ms: f64) -> Self {
        self.budget_ms = budget_ms;
        self
    }

    pub fn model_id(&self) -> Option<&str> {
        self.active.as_ref().map(|a| a.id.as_str())
    }

    pub fn sampling(&self) -> &SamplingConfig {
        &self.sampling
    }

    pub fn piano(&self) -> &Array1<f64> {
        &self.piano
    }

    pub fn past(&self) -> &VecDeque<Array1<f64>> {
        &self.past
    }

    /// Frames emitted so far, which is also the index of the next frame.
    pub fn frame_count(&self) -> u64 {
        self.frame
    }

    pub fn latency(&self) -> &LatencyStats {
        &self.latency
    }

    fn clear_past(&mut self) {
        self.past.clear();
        if let Some(a) = &self.active {
            for _ in 0..a.model.horizon {
                self.past.push_back(Array1::zeros(a.model.orchestra_dim()));
            }
        }
    }

    fn ack(&self, request: &str) -> Outbound {
        Outbound::Ack {
            request: request.into(),
            model_id: self.model_id().map(str::to_string),
            sampling: self.sampling.clone(),
        }
    }

    /// Applies a message without ticking. Returns the replies it produces.
    pub fn apply(&mut self, msg: &Inbound) -> Vec<Outbound> {
        match msg {
            Inbound::NoteOn { pitch, velocity, .. } => self.set_key(*pitch, *velocity > 0),
            Inbound::NoteOff { pitch } => self.set_key(*pitch, false),
            Inbound::PianoFrame { pitches, .. } => {
                let mut replies = Vec::new();
                self.piano.fill(0.0);
                for &p in pitches {
                    replies.extend(self.set_key(p, true));
                }
                replies
            }
            Inbound::Pulse => Vec::new(),
            Inbound::SetModel { model_id } => vec![self.set_model(model_id)],
            Inbound::SetSampling { gibbs_steps, threshold, seed } => {
                let mut next = self.sampling.clone();
                next.gibbs_steps = gibbs_steps.unwrap_or(next.gibbs_steps);
                next.threshold = threshold.unwrap_or(next.threshold);
                next.seed = seed.unwrap_or(next.seed);
                if let Err(e) = next.validate() {
                    return vec![Outbound::error(format!("set_sampling rejected: {e}"))];
                }
                if seed.is_some() {
                    self.rng = ChaCha8Rng::seed_from_u64(next.seed);
                }
                self.sampling = next;
                vec![self.ack("set_sampling")]
            }
            Inbound::Reset => {
                self.clear_past();
                self.piano.fill(0.0);
                self.rng = ChaCha8Rng::seed_from_u64(self.sampling.seed);
                vec![self.ack("reset")]
            }
        }
    }

    fn set_key(&mut self, pitch: u8, on: bool) -> Vec<Outbound> {
        if pitch > 127 {
            return vec![Outbound::error(format!("pitch {pitch} is not a MIDI pitch"))];
        }
        match piano_key_index(pitch) {
            Some(k) => {
                self.piano[k] = if on { 1.0 } else { 0.0 };
                Vec::new()
            }
            None => vec![Outbound::warning(format!(
                "pitch {pitch} is outside the piano range {PIANO_LOWEST}..={PIANO_HIGHEST}; ignored"
            ))],
        }
    }

    fn set_model(&mut self, id: &str) -> Outbound {
        let Some(model) = self.registry.get(id) else {
            return Outbound::error(format!("unknown model `{id}`; available: {:?}", self.registry.ids()));
        };
        if let Some(current) = &self.active {
            let (m, c) = (&model, &current.model);
            if m.orchestra_dim() != c.orchestra_dim() || m.horizon != c.horizon {
                return Outbound::error(format!(
                    "model `{id}` is incompatible: expected D={} N={}, got D={} N={}",
                    c.orchestra_dim(),
                    c.horizon,
                    m.orchestra_dim(),
                    m.horizon
                ));
            }
            if m.layout != c.layout {
                return Outbound::error(format!("model `{id}` has a different orchestra layout of the same size D={}", m.orchestra_dim()));
            }
        }
        let fresh = self.active.is_none();
        self.active = Some(Active { id: id.to_string(), model });
        if fresh {
            self.clear_past();
        }
        self.ack("set_model")
    }

    /// Generates the next frame from the current piano vector and the ring
    /// buffer, then pushes it into the buffer.
    pub fn tick(&mut self) -> Outbound {
        let Some(active) = &self.active else {
            return Outbound::error("no model loaded");
        };
        let start = Instant::now();
        let ctx = ProjectionContext {
            piano_now: self.piano.clone(),
            orchestra_past: self.past.iter().cloned().collect(),
        };
        let config = SamplingConfig {
            output_mode: OutputMode::MeanField,
            ..self.sampling.clone()
        };
        let state = match active.model.predict_frame(&ctx, &config, &mut self.rng) {
            Ok(s) => s,
            Err(e) => return Outbound::error(format!("tick failed: {e}")),
        };
        let latency_ms = start.elapsed().as_secs_f64() * 1e3;
        let parts: BTreeMap<String, Vec<u8>> = active.model.layout.decode(&state).into_iter().collect();
        let model_id = active.id.clone();
        self.past.pop_front();
        self.past.push_back(state);
        let frame = self.frame;
        self.frame += 1;
        self.latency.record(latency_ms);
        Outbound::OrchestraFrame {
            frame,
            model_id,
            parts,
            latency_ms,
            over_budget: latency_ms > self.budget_ms,
        }
    }

    /// Applies a batch of queued messages. Pulses separated only by note
    /// changes collapse into one tick on the latest piano vector; controls
    /// and error replies are never reordered across a pending tick.
    pub fn process_batch(&mut self, batch: &[Queued]) -> Vec<Outbound> {
        let mut out = Vec::new();
        let mut pending = false;
        for item in batch {
            let performance = matches!(item, Ok(m) if m.is_performance());
            if !performance && pending {
                out.push(self.tick());
                pending = false;
            }
            match item {
                Ok(msg) => {
                    out.extend(self.apply(msg));
                    pending |= msg.pulses();
                }
                Err(detail) => out.push(Outbound::error(detail.clone())),
            }
        }
        if pending {
            out.push(self.tick());
        }
        out
    }
}
