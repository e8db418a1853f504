use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use super::math::{add_weighted_rows, row_dots, sigmoid};
use super::params::{CrbmParams, FgcrbmParams, ModelParams, RbmParams};
use super::EbmError;

/// Values clamped while the visible units are sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum Context {
    /// Plain RBM; every visible unit is free.
    Unconditioned,
    /// RBM inpainting: the leading `known.len()` visible units are held at
    /// `known`, the remaining ones are free.
    Inpaint(Array1<f64>),
    /// cRBM context units `x`.
    Conditional(Array1<f64>),
    /// FGcRBM context units `x` and feature units `z`.
    Gated {
        context: Array1<f64>,
        feature: Array1<f64>,
    },
}

impl Context {
    fn name(&self) -> &'static str {
        match self {
            Context::Unconditioned => "unconditioned",
            Context::Inpaint(_) => "inpaint",
            Context::Conditional(_) => "conditional",
            Context::Gated { .. } => "gated",
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), EbmError> {
    if expected == actual {
        Ok(())
    } else {
        Err(EbmError::Dimension {
            what,
            expected,
            actual,
        })
    }
}

/// cRBM dynamic biases `ã = a + Aᵀx`, `b̃ = b + Bᵀx`.
pub fn dynamic_biases_crbm(
    params: &CrbmParams,
    x: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>), EbmError> {
    check_len("context", params.n_context(), x.len())?;
    let mut a = params.base.visible_bias.clone();
    let mut b = params.base.hidden_bias.clone();
    add_weighted_rows(&mut a, params.context_visible.view(), x);
    add_weighted_rows(&mut b, params.context_hidden.view(), x);
    Ok((a, b))
}

fn gate_product(gate: &super::params::FactoredGate, x: ArrayView1<f64>, z: ArrayView1<f64>) -> Array1<f64> {
    let f = gate.unit.ncols();
    let mut from_x = Array1::zeros(f);
    let mut from_z = Array1::zeros(f);
    add_weighted_rows(&mut from_x, gate.context.view(), x);
    add_weighted_rows(&mut from_z, gate.feature.view(), z);
    from_x * from_z
}

/// FGcRBM dynamic biases
/// `â_i = a_i + Σ_f A_if (A_xᵀx)_f (A_zᵀz)_f`, likewise `b̂` with the hidden
/// gate.
pub fn dynamic_biases_fgcrbm(
    params: &FgcrbmParams,
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>), EbmError> {
    check_len("context", params.visible_gate.context.nrows(), x.len())?;
    check_len("feature", params.coupling.feature.nrows(), z.len())?;
    let a = &params.visible_bias + &row_dots(params.visible_gate.unit.view(), gate_product(&params.visible_gate, x, z).view());
    let b = &params.hidden_bias + &row_dots(params.hidden_gate.unit.view(), gate_product(&params.hidden_gate, x, z).view());
    Ok((a, b))
}

#[derive(Debug, Clone)]
enum Coupling<'a> {
    Dense(ArrayView2<'a, f64>),
    Factored {
        visible: ArrayView2<'a, f64>,
        hidden: ArrayView2<'a, f64>,
        /// `W_zᵀz`, the per-factor gain set by the feature units.
        gain: Array1<f64>,
    },
}

/// A model with its context clamped: an RBM over the free visible units and
/// the hidden units, with dynamic biases already folded in.
///
/// Every member of the family reduces to this form once its context is fixed,
/// so sampling and training share one code path.
#[derive(Debug, Clone)]
pub struct ClampedModel<'a> {
    visible_bias: Array1<f64>,
    hidden_bias: Array1<f64>,
    coupling: Coupling<'a>,
}

impl ModelParams {
    /// Folds `context` into the biases; fails if the context does not fit the
    /// model kind or its dimensions.
    pub fn clamp(&self, context: &Context) -> Result<ClampedModel<'_>, EbmError> {
        match (self, context) {
            (ModelParams::Rbm(p), Context::Unconditioned) => Ok(ClampedModel {
                visible_bias: p.visible_bias.clone(),
                hidden_bias: p.hidden_bias.clone(),
                coupling: Coupling::Dense(p.weights.view()),
            }),
            (ModelParams::Rbm(p), Context::Inpaint(known)) => {
                let k = known.len();
                if k > p.n_visible() {
                    return Err(EbmError::Dimension {
                        what: "clamped visible prefix",
                        expected: p.n_visible(),
                        actual: k,
                    });
                }
                let mut hidden_bias = p.hidden_bias.clone();
                add_weighted_rows(&mut hidden_bias, p.weights.slice(s![..k, ..]), known.view());
                Ok(ClampedModel {
                    visible_bias: p.visible_bias.slice(s![k..]).to_owned(),
                    hidden_bias,
                    coupling: Coupling::Dense(p.weights.slice(s![k.., ..])),
                })
            }
            (ModelParams::Crbm(p), Context::Conditional(x)) => {
                let (visible_bias, hidden_bias) = dynamic_biases_crbm(p, x.view())?;
                Ok(ClampedModel {
                    visible_bias,
                    hidden_bias,
                    coupling: Coupling::Dense(p.base.weights.view()),
                })
            }
            (ModelParams::Fgcrbm(p), Context::Gated { context, feature }) => {
                let (visible_bias, hidden_bias) = dynamic_biases_fgcrbm(p, context.view(), feature.view())?;
                let mut gain = Array1::zeros(p.coupling.feature.ncols());
                add_weighted_rows(&mut gain, p.coupling.feature.view(), feature.view());
                Ok(ClampedModel {
                    visible_bias,
                    hidden_bias,
                    coupling: Coupling::Factored {
                        visible: p.coupling.visible.view(),
                        hidden: p.coupling.hidden.view(),
                        gain,
                    },
                })
            }
            (params, ctx) => Err(EbmError::ContextMismatch {
                kind: params.kind(),
                context: ctx.name(),
            }),
        }
    }
}

impl ClampedModel<'_> {
    /// Number of free visible units.
    pub fn n_visible(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn visible_bias(&self) -> &Array1<f64> {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &Array1<f64> {
        &self.hidden_bias
    }

    /// Total input to each hidden unit given the free visible units.
    pub fn hidden_input(&self, v: ArrayView1<f64>) -> Result<Array1<f64>, EbmError> {
        check_len("visible", self.n_visible(), v.len())?;
        let mut out = self.hidden_bias.clone();
        match &self.coupling {
            Coupling::Dense(w) => add_weighted_rows(&mut out, *w, v),
            Coupling::Factored { visible, hidden, gain } => {
                let mut proj = Array1::zeros(gain.len());
                add_weighted_rows(&mut proj, *visible, v);
                proj *= gain;
                out += &row_dots(*hidden, proj.view());
            }
        }
        Ok(out)
    }

    /// Total input to each free visible unit given the hidden units.
    pub fn visible_input(&self, h: ArrayView1<f64>) -> Result<Array1<f64>, EbmError> {
        check_len("hidden", self.n_hidden(), h.len())?;
        let mut out = self.visible_bias.clone();
        match &self.coupling {
            Coupling::Dense(w) => out += &row_dots(*w, h),
            Coupling::Factored { visible, hidden, gain } => {
                let mut proj = Array1::zeros(gain.len());
                add_weighted_rows(&mut proj, *hidden, h);
                proj *= gain;
                out += &row_dots(*visible, proj.view());
            }
        }
        Ok(out)
    }

    /// `p(h_j = 1 | v)` for every hidden unit.
    pub fn hidden_means(&self, v: ArrayView1<f64>) -> Result<Array1<f64>, EbmError> {
        Ok(self.hidden_input(v)?.mapv_into(sigmoid))
    }

    /// `p(v_i = 1 | h)` for every free visible unit.
    pub fn visible_means(&self, h: ArrayView1<f64>) -> Result<Array1<f64>, EbmError> {
        Ok(self.visible_input(h)?.mapv_into(sigmoid))
    }

    /// Energy of a joint configuration of free visible and hidden units.
    pub fn energy(&self, v: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<f64, EbmError> {
        check_len("visible", self.n_visible(), v.len())?;
        check_len("hidden", self.n_hidden(), h.len())?;
        let interaction = match &self.coupling {
            Coupling::Dense(w) => v.dot(&row_dots(*w, h)),
            Coupling::Factored { visible, hidden, gain } => {
                let mut pv = Array1::zeros(gain.len());
                let mut ph = Array1::zeros(gain.len());
                add_weighted_rows(&mut pv, *visible, v);
                add_weighted_rows(&mut ph, *hidden, h);
                (pv * ph * gain).sum()
            }
        };
        Ok(-self.visible_bias.dot(&v) - interaction - self.hidden_bias.dot(&h))
    }

    /// The pairwise visible × hidden weights in effect; for a factored model
    /// `W_ij = Σ_f W_vif W_hjf (W_zᵀz)_f`.
    pub fn effective_weights(&self) -> Array2<f64> {
        match &self.coupling {
            Coupling::Dense(w) => w.to_owned(),
            Coupling::Factored { visible, hidden, gain } => {
                let scaled = visible.to_owned() * &gain.view().insert_axis(ndarray::Axis(0));
                scaled.dot(&hidden.t())
            }
        }
    }
}

/// `E(v, h) = −aᵀv − vᵀWh − bᵀh`.
pub fn energy_rbm(params: &RbmParams, v: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<f64, EbmError> {
    check_len("visible", params.n_visible(), v.len())?;
    check_len("hidden", params.n_hidden(), h.len())?;
    Ok(-params.visible_bias.dot(&v) - v.dot(&params.weights.dot(&h)) - params.hidden_bias.dot(&h))
}

/// FGcRBM energy with feature-gated coupling and gated dynamic biases.
pub fn energy_fgcrbm(
    params: &FgcrbmParams,
    v: ArrayView1<f64>,
    h: ArrayView1<f64>,
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
) -> Result<f64, EbmError> {
    let model = ModelParams::Fgcrbm(params.clone());
    let ctx = Context::Gated {
        context: x.to_owned(),
        feature: z.to_owned(),
    };
    model.clamp(&ctx)?.energy(v, h)
}

/// Energy of `(v, h)` given the context. For inpainting `v` covers the free
/// visible units only.
pub fn energy(params: &ModelParams, v: ArrayView1<f64>, h: ArrayView1<f64>, context: &Context) -> Result<f64, EbmError> {
    params.clamp(context)?.energy(v, h)
}

/// `p(h_j = 1 | v, context)`.
pub fn cond_hidden(params: &ModelParams, v: ArrayView1<f64>, context: &Context) -> Result<Array1<f64>, EbmError> {
    params.clamp(context)?.hidden_means(v)
}

/// `p(v_i = 1 | h, context)` for the free visible units.
pub fn cond_visible(params: &ModelParams, h: ArrayView1<f64>, context: &Context) -> Result<Array1<f64>, EbmError> {
    params.clamp(context)?.visible_means(h)
}
