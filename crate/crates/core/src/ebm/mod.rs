//! Energy-based models: plain, conditional and factored gated conditional
//! RBMs, their Gibbs samplers and contrastive-divergence training.

mod conditioned;
pub mod exact;
pub mod io;
mod math;
mod params;
mod sampling;
mod train;

pub use conditioned::{
    cond_hidden, cond_visible, dynamic_biases_crbm, dynamic_biases_fgcrbm, energy, energy_fgcrbm, energy_rbm,
    ClampedModel, Context,
};
pub use math::sigmoid;
pub use params::{
    CrbmParams, FactorDims, FactoredCoupling, FactoredGate, FgcrbmParams, ModelKind, ModelParams, RbmParams,
    UnitDims, INIT_WEIGHT_STD,
};
pub use sampling::{binarize, generate_clamped, gibbs_step, sample_bernoulli, OutputMode, SamplingConfig};
pub use train::{positive_statistics, CdConfig, ContrastiveDivergence, TrainingExample};

#[derive(Debug, thiserror::Error)]
pub enum EbmError {
    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("a {kind} model cannot be clamped with a {context} context")]
    ContextMismatch { kind: ModelKind, context: &'static str },
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("exact enumeration over {units} units exceeds the limit of {limit}")]
    EnumerationTooLarge { units: usize, limit: usize },
    #[error("model file version {found} is not supported (expected {supported})")]
    Version { found: u32, supported: u32 },
    #[error("model file truncated in {section}")]
    Truncated { section: String },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}
