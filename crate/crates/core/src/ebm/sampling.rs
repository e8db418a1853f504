use ndarray::{Array1, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conditioned::{ClampedModel, Context};
use super::params::ModelParams;
use super::EbmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    /// The final binary visible sample.
    Sample,
    /// The final `p(v | h)`; callers threshold it when they need binary output.
    MeanField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub gibbs_steps: usize,
    pub seed: u64,
    pub output_mode: OutputMode,
    pub threshold: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            gibbs_steps: 20,
            seed: 0,
            output_mode: OutputMode::MeanField,
            threshold: 0.5,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), EbmError> {
        if self.gibbs_steps == 0 {
            return Err(EbmError::Config("gibbs_steps must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(EbmError::Config(format!(
                "threshold {} must lie in (0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Binary vector with `out_i = 1` iff `means_i > threshold`.
pub fn binarize(means: &Array1<f64>, threshold: f64) -> Array1<f64> {
    means.mapv(|p| if p > threshold { 1.0 } else { 0.0 })
}

/// Draws one Bernoulli sample per mean.
pub fn sample_bernoulli(means: &Array1<f64>, rng: &mut impl Rng) -> Array1<f64> {
    means.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
}

impl ClampedModel<'_> {
    /// `h ~ p(h | v)`, then `v' ~ p(v | h)`.
    pub fn gibbs_step(
        &self,
        v: ArrayView1<f64>,
        rng: &mut impl Rng,
    ) -> Result<(Array1<f64>, Array1<f64>), EbmError> {
        let h = sample_bernoulli(&self.hidden_means(v)?, rng);
        let v_next = sample_bernoulli(&self.visible_means(h.view())?, rng);
        Ok((v_next, h))
    }

    /// Runs a `K`-step chain from a uniform random visible state.
    pub fn generate(&self, config: &SamplingConfig, rng: &mut impl Rng) -> Result<Array1<f64>, EbmError> {
        config.validate()?;
        let mut v = Array1::from_shape_simple_fn(self.n_visible(), || {
            if rng.random::<f64>() < 0.5 {
                1.0
            } else {
                0.0
            }
        });
        for step in 0..config.gibbs_steps {
            let h = sample_bernoulli(&self.hidden_means(v.view())?, rng);
            let means = self.visible_means(h.view())?;
            if step + 1 == config.gibbs_steps && config.output_mode == OutputMode::MeanField {
                return Ok(means);
            }
            v = sample_bernoulli(&means, rng);
        }
        Ok(v)
    }
}

/// One alternating Gibbs sweep. Under [`Context::Inpaint`], `v` and the result
/// cover the free visible units only; the clamped units never change.
pub fn gibbs_step(
    params: &ModelParams,
    v: ArrayView1<f64>,
    context: &Context,
    rng: &mut impl Rng,
) -> Result<(Array1<f64>, Array1<f64>), EbmError> {
    params.clamp(context)?.gibbs_step(v, rng)
}

/// Estimates the free visible units given the clamped context.
///
/// The chain starts from i.i.d. Bernoulli(0.5) visible units (never from the
/// previous frame) and alternates `gibbs_steps` hidden/visible samples. The
/// output is the last binary sample or the last visible means, per
/// `config.output_mode`.
pub fn generate_clamped(
    params: &ModelParams,
    context: &Context,
    config: &SamplingConfig,
    rng: &mut impl Rng,
) -> Result<Array1<f64>, EbmError> {
    params.clamp(context)?.generate(config, rng)
}
