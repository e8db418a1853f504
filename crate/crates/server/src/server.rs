//! HTTP and WebSocket transport.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use lop_core::ebm::SamplingConfig;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use crate::protocol::{parse_inbound, Inbound, Outbound};
use crate::registry::ModelRegistry;
use crate::session::{Queued, Session, DEFAULT_BUDGET_MS};
use crate::ServerError;

/// Messages waiting for a session's worker. The reader blocks when full.
const QUEUE_CAPACITY: usize = 256;

#[derive(Debug, Clone)]
pub struct AppState {
    pub registry: Arc<ModelRegistry>,
    pub sampling: SamplingConfig,
    /// 0 leaves ticking to the client.
    pub metronome_ms: u64,
    pub budget_ms: f64,
}

impl AppState {
    pub fn new(registry: ModelRegistry) -> Self {
        Self {
            registry: Arc::new(registry),
            sampling: SamplingConfig::default(),
            metronome_ms: 0,
            budget_ms: DEFAULT_BUDGET_MS,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/models", get(models))
        .route("/session", get(session))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: AppState) -> Result<(), ServerError> {
    axum::serve(listener, router(state)).await.map_err(ServerError::Io)
}

/// Binds `addr` and serves.
pub async fn run(addr: SocketAddr, state: AppState) -> Result<(), ServerError> {
    let listener = TcpListener::bind(addr).await.map_err(ServerError::Io)?;
    log::info!("listening on {}", listener.local_addr().map_err(ServerError::Io)?);
    serve(listener, state).await
}

async fn health(State(state): State<AppState>) -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok", "models": state.registry.len() }))
}

async fn models(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.registry.info())
}

async fn session(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, state))
}

async fn run_session(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (in_tx, in_rx) = mpsc::channel::<Queued>(QUEUE_CAPACITY);
    let (out_tx, mut out_rx) = mpsc::channel::<Outbound>(QUEUE_CAPACITY);

    let session = Session::new(state.registry.clone(), state.sampling.clone()).with_budget_ms(state.budget_ms);
    let worker = tokio::task::spawn_blocking(move || worker(session, in_rx, out_tx));

    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            if sink.send(Message::Text(msg.to_json().into())).await.is_err() {
                break;
            }
        }
    });

    let metronome = (state.metronome_ms > 0).then(|| {
        let tx = in_tx.clone();
        let period = Duration::from_millis(state.metronome_ms);
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
            loop {
                interval.tick().await;
                match tx.try_send(Ok(Inbound::Pulse)) {
                    // a full queue already holds work; pulses coalesce anyway
                    Ok(()) | Err(mpsc::error::TrySendError::Full(_)) => {}
                    Err(mpsc::error::TrySendError::Closed(_)) => break,
                }
            }
        })
    });

    // malformed input is answered through the same ordered queue
    while let Some(frame) = stream.next().await {
        let item = match frame {
            Ok(Message::Text(t)) => parse_inbound(&t),
            Ok(Message::Binary(_)) => Err("binary frames are not supported; send JSON text".into()),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        if in_tx.send(item).await.is_err() {
            break;
        }
    }
    drop(in_tx);
    if let Some(m) = metronome {
        m.abort();
    }
    let _ = worker.await;
    let _ = writer.await;
}

/// Drains whatever is queued, applies it as one batch, repeats.
fn worker(mut session: Session, mut rx: mpsc::Receiver<Queued>, tx: mpsc::Sender<Outbound>) {
    while let Some(first) = rx.blocking_recv() {
        let mut batch = vec![first];
        while let Ok(more) = rx.try_recv() {
            batch.push(more);
        }
        for reply in session.process_batch(&batch) {
            if tx.blocking_send(reply).is_err() {
                return;
            }
        }
    }
}
