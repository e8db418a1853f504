//! Tick latency measurement.

use std::sync::Arc;

use lop_core::ebm::{FactorDims, ModelKind, ModelParams, SamplingConfig};
use lop_core::projection::{ModelBinding, OrchestrationModel};
use lop_core::score_io::{LayoutPart, OrchestraLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::protocol::{Inbound, Outbound};
use crate::registry::ModelRegistry;
use crate::session::Session;
use crate::ServerError;

#[derive(Debug, Clone, Serialize)]
pub struct TickBenchmark {
    pub ticks: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// A layout of `dim` pitches split into parts of at most 128.
pub fn synthetic_layout(dim: usize) -> OrchestraLayout {
    let parts = (0..dim.div_ceil(128))
        .map(|k| {
            let width = (dim - 128 * k).min(128);
            let pitches: Vec<u8> = (0..width as u8).collect();
            LayoutPart {
                name: format!("part{k:02}"),
                range: (0..=127).collect(),
                kept: pitches,
            }
        })
        .collect();
    OrchestraLayout::new(parts)
}

/// A freshly initialized model of the given size, for timing only.
pub fn untrained_model(
    kind: ModelKind,
    orchestra_dim: usize,
    n_hidden: usize,
    horizon: usize,
    n_factors: usize,
    seed: u64,
) -> Result<OrchestrationModel, ServerError> {
    let binding = ModelBinding::new(kind, orchestra_dim, horizon)?;
    let params = ModelParams::init(
        kind,
        binding.unit_dims(n_hidden),
        FactorDims::uniform(n_factors),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .map_err(lop_core::Error::from)?;
    Ok(OrchestrationModel::new(params, synthetic_layout(orchestra_dim), 4, horizon)?)
}

/// Runs `ticks` ticks through a session, changing the chord before each one,
/// and summarizes the compute time the session recorded.
pub fn bench_ticks(model: OrchestrationModel, sampling: SamplingConfig, ticks: usize) -> Result<TickBenchmark, ServerError> {
    let mut registry = ModelRegistry::default();
    registry.insert("bench", model);
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed ^ 0x5eed);
    let mut session = Session::new(Arc::new(registry), sampling);
    let mut times = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        let pitches = (0..rng.random_range(0..6)).map(|_| rng.random_range(21..=108)).collect();
        session.apply(&Inbound::PianoFrame { pitches, pulse: false });
        match session.tick() {
            Outbound::OrchestraFrame { latency_ms, .. } => times.push(latency_ms),
            Outbound::Error { detail } => return Err(ServerError::Tick(detail)),
            other => unreachable!("tick returned {other:?}"),
        }
    }
    Ok(summarize(&times))
}

pub fn summarize(times: &[f64]) -> TickBenchmark {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let at = |q: f64| if n == 0 { 0.0 } else { sorted[((n - 1) as f64 * q).round() as usize] };
    let median = if n == 0 {
        0.0
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    TickBenchmark {
        ticks: n,
        median_ms: median,
        mean_ms: if n == 0 { 0.0 } else { sorted.iter().sum::<f64>() / n as f64 },
        p95_ms: at(0.95),
        max_ms: sorted.last().copied().unwrap_or(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_the_requested_width() {
        for d in [1, 48, 128, 129, 1220] {
            assert_eq!(synthetic_layout(d).total_dim(), d);
        }
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!((s.ticks, s.median_ms, s.mean_ms, s.max_ms), (4, 2.5, 2.5, 4.0));
        assert_eq!(summarize(&[]).median_ms, 0.0);
    }

    #[test]
    fn small_benchmark_runs() {
        let model = untrained_model(ModelKind::Fgcrbm, 20, 16, 2, 4, 0).unwrap();
        let b = bench_ticks(model, SamplingConfig::default(), 10).unwrap();
        assert_eq!(b.ticks, 10);
        assert!(b.median_ms >= 0.0 && b.max_ms >= b.median_ms);
    }
}
