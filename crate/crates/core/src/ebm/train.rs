//! Contrastive divergence over minibatches.
//!
//! Within a batch every example carries its own context, so the clamped
//! biases become matrices (one row per example) and all products are batched
//! matrix multiplications.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conditioned::{check_len, Context};
use super::math::sigmoid;
use super::params::{CrbmParams, FactoredGate, FgcrbmParams, ModelParams, RbmParams};
use super::EbmError;

/// One visible configuration to learn, with its context.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub visible: Array1<f64>,
    pub context: Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    /// Gibbs steps per negative sample.
    pub k: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 penalty on weight matrices (biases are not decayed).
    pub weight_decay: f64,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            k: 10,
            learning_rate: 1e-3,
            momentum: 0.5,
            weight_decay: 1e-4,
        }
    }
}

struct Batch {
    visible: Array2<f64>,
    context: Option<Array2<f64>>,
    feature: Option<Array2<f64>>,
}

fn stack(rows: &[&Array1<f64>], width: usize, what: &'static str) -> Result<Array2<f64>, EbmError> {
    let mut out = Array2::zeros((rows.len(), width));
    for (mut dst, src) in out.rows_mut().into_iter().zip(rows) {
        check_len(what, width, src.len())?;
        dst.assign(src);
    }
    Ok(out)
}

fn stack_batch(params: &ModelParams, batch: &[TrainingExample]) -> Result<Batch, EbmError> {
    let dims = params.dims();
    let visible = stack(&batch.iter().map(|e| &e.visible).collect::<Vec<_>>(), dims.visible, "visible")?;
    let mismatch = |ctx: &Context| EbmError::ContextMismatch {
        kind: params.kind(),
        context: match ctx {
            Context::Unconditioned => "unconditioned",
            Context::Inpaint(_) => "inpaint",
            Context::Conditional(_) => "conditional",
            Context::Gated { .. } => "gated",
        },
    };
    let (context, feature) = match params {
        ModelParams::Rbm(_) => {
            if let Some(e) = batch.iter().find(|e| e.context != Context::Unconditioned) {
                return Err(mismatch(&e.context));
            }
            (None, None)
        }
        ModelParams::Crbm(_) => {
            let mut xs = Vec::with_capacity(batch.len());
            for e in batch {
                match &e.context {
                    Context::Conditional(x) => xs.push(x),
                    other => return Err(mismatch(other)),
                }
            }
            (Some(stack(&xs, dims.context, "context")?), None)
        }
        ModelParams::Fgcrbm(_) => {
            let mut xs = Vec::with_capacity(batch.len());
            let mut zs = Vec::with_capacity(batch.len());
            for e in batch {
                match &e.context {
                    Context::Gated { context, feature } => {
                        xs.push(context);
                        zs.push(feature);
                    }
                    other => return Err(mismatch(other)),
                }
            }
            (
                Some(stack(&xs, dims.context, "context")?),
                Some(stack(&zs, dims.feature, "feature")?),
            )
        }
    };
    Ok(Batch {
        visible,
        context,
        feature,
    })
}

fn broadcast(bias: &Array1<f64>, rows: usize) -> Array2<f64> {
    bias.broadcast((rows, bias.len()))
        .expect("row broadcast")
        .to_owned()
}

fn gate_rows(gate: &FactoredGate, x: &Array2<f64>, z: &Array2<f64>) -> Array2<f64> {
    x.dot(&gate.context) * z.dot(&gate.feature)
}

/// A batch of clamped models: per-example dynamic biases (and feature gains).
struct BatchModel<'a> {
    params: &'a ModelParams,
    visible_bias: Array2<f64>,
    hidden_bias: Array2<f64>,
    gain: Option<Array2<f64>>,
}

impl<'a> BatchModel<'a> {
    fn new(params: &'a ModelParams, batch: &Batch) -> Self {
        let rows = batch.visible.nrows();
        match params {
            ModelParams::Rbm(p) => Self {
                params,
                visible_bias: broadcast(&p.visible_bias, rows),
                hidden_bias: broadcast(&p.hidden_bias, rows),
                gain: None,
            },
            ModelParams::Crbm(p) => {
                let x = batch.context.as_ref().expect("stacked context");
                Self {
                    params,
                    visible_bias: x.dot(&p.context_visible) + &p.base.visible_bias,
                    hidden_bias: x.dot(&p.context_hidden) + &p.base.hidden_bias,
                    gain: None,
                }
            }
            ModelParams::Fgcrbm(p) => {
                let x = batch.context.as_ref().expect("stacked context");
                let z = batch.feature.as_ref().expect("stacked feature");
                Self {
                    params,
                    visible_bias: gate_rows(&p.visible_gate, x, z).dot(&p.visible_gate.unit.t()) + &p.visible_bias,
                    hidden_bias: gate_rows(&p.hidden_gate, x, z).dot(&p.hidden_gate.unit.t()) + &p.hidden_bias,
                    gain: Some(z.dot(&p.coupling.feature)),
                }
            }
        }
    }

    fn hidden_means(&self, v: &Array2<f64>) -> Array2<f64> {
        let input = match self.params {
            ModelParams::Rbm(RbmParams { weights, .. })
            | ModelParams::Crbm(CrbmParams {
                base: RbmParams { weights, .. },
                ..
            }) => v.dot(weights) + &self.hidden_bias,
            ModelParams::Fgcrbm(p) => {
                let gain = self.gain.as_ref().expect("factored gain");
                (v.dot(&p.coupling.visible) * gain).dot(&p.coupling.hidden.t()) + &self.hidden_bias
            }
        };
        input.mapv_into(sigmoid)
    }

    fn visible_means(&self, h: &Array2<f64>) -> Array2<f64> {
        let input = match self.params {
            ModelParams::Rbm(RbmParams { weights, .. })
            | ModelParams::Crbm(CrbmParams {
                base: RbmParams { weights, .. },
                ..
            }) => h.dot(&weights.t()) + &self.visible_bias,
            ModelParams::Fgcrbm(p) => {
                let gain = self.gain.as_ref().expect("factored gain");
                (h.dot(&p.coupling.hidden) * gain).dot(&p.coupling.visible.t()) + &self.visible_bias
            }
        };
        input.mapv_into(sigmoid)
    }
}

/// Batch sums of `−∂E/∂θ` at the given visible/hidden rows.
fn statistics(params: &ModelParams, batch: &Batch, v: &Array2<f64>, h: &Array2<f64>) -> ModelParams {
    let sum_rows = |m: &Array2<f64>| m.sum_axis(Axis(0));
    match params {
        ModelParams::Rbm(_) => ModelParams::Rbm(RbmParams {
            weights: v.t().dot(h),
            visible_bias: sum_rows(v),
            hidden_bias: sum_rows(h),
        }),
        ModelParams::Crbm(_) => {
            let x = batch.context.as_ref().expect("stacked context");
            ModelParams::Crbm(CrbmParams {
                base: RbmParams {
                    weights: v.t().dot(h),
                    visible_bias: sum_rows(v),
                    hidden_bias: sum_rows(h),
                },
                context_visible: x.t().dot(v),
                context_hidden: x.t().dot(h),
            })
        }
        ModelParams::Fgcrbm(p) => {
            let x = batch.context.as_ref().expect("stacked context");
            let z = batch.feature.as_ref().expect("stacked feature");
            let gain = z.dot(&p.coupling.feature);
            let pv = v.dot(&p.coupling.visible);
            let ph = h.dot(&p.coupling.hidden);
            let gate_stats = |gate: &FactoredGate, units: &Array2<f64>| {
                let from_x = x.dot(&gate.context);
                let from_z = z.dot(&gate.feature);
                let from_u = units.dot(&gate.unit);
                FactoredGate {
                    unit: units.t().dot(&(&from_x * &from_z)),
                    context: x.t().dot(&(&from_u * &from_z)),
                    feature: z.t().dot(&(&from_u * &from_x)),
                }
            };
            ModelParams::Fgcrbm(FgcrbmParams {
                visible_bias: sum_rows(v),
                hidden_bias: sum_rows(h),
                coupling: super::params::FactoredCoupling {
                    visible: v.t().dot(&(&ph * &gain)),
                    hidden: h.t().dot(&(&pv * &gain)),
                    feature: z.t().dot(&(&pv * &ph)),
                },
                visible_gate: gate_stats(&p.visible_gate, v),
                hidden_gate: gate_stats(&p.hidden_gate, h),
            })
        }
    }
}

fn sample_rows(means: &Array2<f64>, rng: &mut impl Rng) -> Array2<f64> {
    means.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
}

/// Data-phase statistics averaged over the batch: each term of `−∂E/∂θ`
/// evaluated at the data visible units and the hidden means `p(h | v)`.
pub fn positive_statistics(params: &ModelParams, batch: &[TrainingExample]) -> Result<ModelParams, EbmError> {
    if batch.is_empty() {
        return Err(EbmError::Config("empty batch".into()));
    }
    let b = stack_batch(params, batch)?;
    let model = BatchModel::new(params, &b);
    let h = model.hidden_means(&b.visible);
    let mut stats = statistics(params, &b, &b.visible, &h);
    let n = batch.len() as f64;
    for (_, mut t) in stats.tensors_mut() {
        t /= n;
    }
    Ok(stats)
}

/// CD-k with momentum and weight decay. Holds the velocity between updates.
#[derive(Debug, Clone)]
pub struct ContrastiveDivergence {
    config: CdConfig,
    velocity: Option<ModelParams>,
}

impl ContrastiveDivergence {
    pub fn new(config: CdConfig) -> Result<Self, EbmError> {
        if config.k == 0 {
            return Err(EbmError::Config("CD needs k ≥ 1".into()));
        }
        Ok(Self {
            config,
            velocity: None,
        })
    }

    pub fn config(&self) -> &CdConfig {
        &self.config
    }

    /// One parameter update from `batch`. Returns the mean squared difference
    /// between the data and the visible means of the last Gibbs step.
    ///
    /// The chain starts at the data; the gradient estimate is the batch mean of
    /// data statistics minus statistics after `k` steps.
    pub fn update(
        &mut self,
        params: &mut ModelParams,
        batch: &[TrainingExample],
        rng: &mut impl Rng,
    ) -> Result<f64, EbmError> {
        if batch.is_empty() {
            return Err(EbmError::Config("empty batch".into()));
        }
        let b = stack_batch(params, batch)?;
        let (grad, recon) = {
            let model = BatchModel::new(params, &b);
            let h_data = model.hidden_means(&b.visible);
            let mut h_sample = sample_rows(&h_data, rng);
            let mut v_model = b.visible.clone();
            let mut v_means = b.visible.clone();
            let mut h_model = h_data.clone();
            for step in 0..self.config.k {
                v_means = model.visible_means(&h_sample);
                v_model = sample_rows(&v_means, rng);
                h_model = model.hidden_means(&v_model);
                if step + 1 < self.config.k {
                    h_sample = sample_rows(&h_model, rng);
                }
            }
            let recon = (&b.visible - &v_means).mapv(|d| d * d).mean().unwrap_or(0.0);
            let mut grad = statistics(params, &b, &b.visible, &h_data);
            let negative = statistics(params, &b, &v_model, &h_model);
            let n = batch.len() as f64;
            for ((_, mut g), (_, neg)) in grad.tensors_mut().into_iter().zip(negative.tensors()) {
                Zip::from(&mut g).and(&neg).for_each(|g, &m| *g = (*g - m) / n);
            }
            (grad, recon)
        };

        let CdConfig {
            learning_rate: lr,
            momentum,
            weight_decay,
            ..
        } = self.config;
        let velocity = self.velocity.get_or_insert_with(|| params.zeros_like());
        for (((_, mut vel), (_, g)), (_, theta)) in velocity
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(params.tensors())
        {
            let decay = if theta.ndim() == 2 { weight_decay } else { 0.0 };
            Zip::from(&mut vel)
                .and(&g)
                .and(&theta)
                .for_each(|vel, &g, &th| *vel = momentum * *vel + lr * (g - decay * th));
        }
        if !velocity.is_finite() {
            return Err(EbmError::Diverged(format!(
                "non-finite update (learning rate {lr}, reconstruction error {recon})"
            )));
        }
        for ((_, mut theta), (_, vel)) in params.tensors_mut().into_iter().zip(velocity.tensors()) {
            theta += &vel;
        }
        if !params.is_finite() {
            return Err(EbmError::Diverged("parameters overflowed".into()));
        }
        Ok(recon)
    }
}
