//! Exact quantities by brute-force enumeration, for tiny models only.

use ndarray::Array1;

use super::conditioned::{ClampedModel, Context};
use super::params::ModelParams;
use super::train::TrainingExample;
use super::EbmError;

/// Largest `free visible + hidden` unit count enumeration accepts.
pub const ENUMERATION_LIMIT: usize = 24;

/// The binary vector whose bit `i` is bit `i` of `index`.
pub fn binary_state(index: usize, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |i| ((index >> i) & 1) as f64)
}

fn guard(model: &ClampedModel<'_>) -> Result<(), EbmError> {
    let units = model.n_visible() + model.n_hidden();
    if units > ENUMERATION_LIMIT {
        return Err(EbmError::EnumerationTooLarge {
            units,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

fn log_unnormalized_marginal(model: &ClampedModel<'_>, v: &Array1<f64>) -> Result<f64, EbmError> {
    let mut acc = LogSumExp::new();
    for hi in 0..(1usize << model.n_hidden()) {
        let h = binary_state(hi, model.n_hidden());
        acc.add(-model.energy(v.view(), h.view())?);
    }
    Ok(acc.value())
}

/// `ln Z` with the context clamped: the log-sum over every binary (free
/// visible, hidden) configuration of `−E`.
pub fn log_partition_function(params: &ModelParams, context: &Context) -> Result<f64, EbmError> {
    let model = params.clamp(context)?;
    guard(&model)?;
    let mut acc = LogSumExp::new();
    for vi in 0..(1usize << model.n_visible()) {
        let v = binary_state(vi, model.n_visible());
        acc.add(log_unnormalized_marginal(&model, &v)?);
    }
    Ok(acc.value())
}

/// `Z = Σ_{v,h} exp(−E(v, h))` given the context.
pub fn partition_function(params: &ModelParams, context: &Context) -> Result<f64, EbmError> {
    Ok(log_partition_function(params, context)?.exp())
}

/// `p(v | context)` for every free visible configuration, indexed as in
/// [`binary_state`].
pub fn visible_distribution(params: &ModelParams, context: &Context) -> Result<Vec<f64>, EbmError> {
    let model = params.clamp(context)?;
    guard(&model)?;
    let logs = (0..(1usize << model.n_visible()))
        .map(|vi| log_unnormalized_marginal(&model, &binary_state(vi, model.n_visible())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut acc = LogSumExp::new();
    logs.iter().for_each(|&l| acc.add(l));
    let log_z = acc.value();
    Ok(logs.into_iter().map(|l| (l - log_z).exp()).collect())
}

/// Mean negative log-likelihood `−(1/N) Σ ln p(v | context)` of the examples.
pub fn exact_nll(params: &ModelParams, data: &[TrainingExample]) -> Result<f64, EbmError> {
    if data.is_empty() {
        return Err(EbmError::Config("empty data set".into()));
    }
    let mut total = 0.0;
    for ex in data {
        let model = params.clamp(&ex.context)?;
        guard(&model)?;
        let log_z = log_partition_function(params, &ex.context)?;
        total += log_z - log_unnormalized_marginal(&model, &ex.visible)?;
    }
    Ok(total / data.len() as f64)
}
