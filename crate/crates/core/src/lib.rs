//! Projective orchestration with conditional energy-based models.
//!
//! A piano score is mapped onto an orchestra one frame at a time: the present
//! orchestral frame is sampled from an RBM, conditional RBM or factored gated
//! conditional RBM, conditioned on the present piano frame and the previous
//! `N` orchestral frames.
//!
//! - [`score_io`]: MIDI / JSON piano-roll ingestion, orchestra layouts, events.
//! - [`ebm`]: the model family, Gibbs sampling, contrastive divergence and an
//!   exact enumeration path for tiny models.
//! - [`projection`]: wiring score frames onto model units, whole-score generation.
//! - [`eval`]: frame- and event-level accuracy, baselines, diagnostics.
//! - [`trainer`]: corpus splits, a synthetic corpus and the training loop.

pub mod ebm;
pub mod score_io;
pub mod error;
pub mod projection;

pub use error::Error;
pub mod eval;
pub mod trainer;
