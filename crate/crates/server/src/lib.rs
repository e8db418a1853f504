//! Live projection server: clients stream piano notes over a WebSocket and
//! receive orchestral frames generated by a trained model.
//!
//! Endpoints: `GET /session` (WebSocket), `GET /models`, `GET /health`.

pub mod bench;
pub mod protocol;
pub mod registry;
pub mod server;
pub mod session;

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

pub use protocol::{Inbound, Outbound};
pub use registry::ModelRegistry;
pub use server::{router, run, serve, AppState};
pub use session::{LatencyStats, Session};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("models directory: {0}")]
    ModelsDir(String),
    #[error(transparent)]
    Model(#[from] lop_core::Error),
    #[error("tick failed: {0}")]
    Tick(String),
    #[error(transparent)]
    Io(std::io::Error),
}

/// Server settings. Every flag can also come from `LOP_<NAME>`.
#[derive(Debug, Clone, clap::Args)]
pub struct ServerArgs {
    /// Directory of `.lopm` model files.
    #[arg(long, env = "LOP_MODELS_DIR")]
    pub models_dir: PathBuf,
    #[arg(long, env = "LOP_PORT", default_value_t = 8765)]
    pub port: u16,
    #[arg(long, env = "LOP_HOST", default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
    /// Tick period in milliseconds; 0 ticks only on client pulses.
    #[arg(long, env = "LOP_METRONOME_MS", default_value_t = 0)]
    pub metronome_ms: u64,
    /// Ticks slower than this are flagged `over_budget`.
    #[arg(long, env = "LOP_BUDGET_MS", default_value_t = session::DEFAULT_BUDGET_MS)]
    pub budget_ms: f64,
}

impl ServerArgs {
    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }

    pub fn state(&self) -> Result<AppState, ServerError> {
        let registry = ModelRegistry::load_dir(&self.models_dir)?;
        if registry.is_empty() {
            log::warn!("no models in {}; ticks will fail until one is added", self.models_dir.display());
        }
        let mut state = AppState::new(registry);
        state.metronome_ms = self.metronome_ms;
        state.budget_ms = self.budget_ms;
        Ok(state)
    }
}
