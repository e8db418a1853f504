use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EbmError;

/// Which member of the model family a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rbm,
    Crbm,
    Fgcrbm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rbm => "rbm",
            ModelKind::Crbm => "crbm",
            ModelKind::Fgcrbm => "fgcrbm",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ModelKind::Rbm => 0,
            ModelKind::Crbm => 1,
            ModelKind::Fgcrbm => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelKind::Rbm),
            1 => Some(ModelKind::Crbm),
            2 => Some(ModelKind::Fgcrbm),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rbm" => Ok(ModelKind::Rbm),
            "crbm" => Ok(ModelKind::Crbm),
            "fgcrbm" => Ok(ModelKind::Fgcrbm),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Unit counts of a model: visible, hidden, context (`x`) and feature (`z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitDims {
    pub visible: usize,
    pub hidden: usize,
    pub context: usize,
    pub feature: usize,
}

/// Factor counts of the three factored interactions of an FGcRBM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorDims {
    pub coupling: usize,
    pub visible_gate: usize,
    pub hidden_gate: usize,
}

impl FactorDims {
    pub fn uniform(n: usize) -> Self {
        Self {
            coupling: n,
            visible_gate: n,
            hidden_gate: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    /// `n_v × n_h`.
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

/// RBM whose biases are shifted linearly by context units.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbmParams {
    pub base: RbmParams,
    /// `n_x × n_v`: context → visible dynamic bias.
    pub context_visible: Array2<f64>,
    /// `n_x × n_h`: context → hidden dynamic bias.
    pub context_hidden: Array2<f64>,
}

/// Three-way visible/hidden/feature tensor stored as three factor matrices:
/// `W_ijl = Σ_f visible[i,f] · hidden[j,f] · feature[l,f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredCoupling {
    pub visible: Array2<f64>,
    pub hidden: Array2<f64>,
    pub feature: Array2<f64>,
}

/// Three-way unit/context/feature tensor driving one dynamic bias:
/// `Δbias_i = Σ_f unit[i,f] · (contextᵀx)_f · (featureᵀz)_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredGate {
    pub unit: Array2<f64>,
    pub context: Array2<f64>,
    pub feature: Array2<f64>,
}

/// Factored gated conditional RBM.
#[derive(Debug, Clone, PartialEq)]
pub struct FgcrbmParams {
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub coupling: FactoredCoupling,
    pub visible_gate: FactoredGate,
    pub hidden_gate: FactoredGate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Rbm(RbmParams),
    Crbm(CrbmParams),
    Fgcrbm(FgcrbmParams),
}

fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

impl RbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
        }
    }

    /// Gaussian weights with standard deviation `std`, zero biases.
    pub fn random(n_visible: usize, n_hidden: usize, std: f64, rng: &mut impl Rng) -> Self {
        Self {
            weights: gaussian(n_visible, n_hidden, std, rng),
            ..Self::zeros(n_visible, n_hidden)
        }
    }

    pub fn n_visible(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }
}

impl CrbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize, n_context: usize) -> Self {
        Self {
            base: RbmParams::zeros(n_visible, n_hidden),
            context_visible: Array2::zeros((n_context, n_visible)),
            context_hidden: Array2::zeros((n_context, n_hidden)),
        }
    }

    pub fn random(
        n_visible: usize,
        n_hidden: usize,
        n_context: usize,
        std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            base: RbmParams::random(n_visible, n_hidden, std, rng),
            context_visible: gaussian(n_context, n_visible, std, rng),
            context_hidden: gaussian(n_context, n_hidden, std, rng),
        }
    }

    pub fn n_context(&self) -> usize {
        self.context_visible.nrows()
    }
}

impl FgcrbmParams {
    pub fn zeros(dims: UnitDims, factors: FactorDims) -> Self {
        let z = |r, c| Array2::zeros((r, c));
        Self {
            visible_bias: Array1::zeros(dims.visible),
            hidden_bias: Array1::zeros(dims.hidden),
            coupling: FactoredCoupling {
                visible: z(dims.visible, factors.coupling),
                hidden: z(dims.hidden, factors.coupling),
                feature: z(dims.feature, factors.coupling),
            },
            visible_gate: FactoredGate {
                unit: z(dims.visible, factors.visible_gate),
                context: z(dims.context, factors.visible_gate),
                feature: z(dims.feature, factors.visible_gate),
            },
            hidden_gate: FactoredGate {
                unit: z(dims.hidden, factors.hidden_gate),
                context: z(dims.context, factors.hidden_gate),
                feature: z(dims.feature, factors.hidden_gate),
            },
        }
    }

    pub fn random(dims: UnitDims, factors: FactorDims, std: f64, rng: &mut impl Rng) -> Self {
        let mut g = |r, c| gaussian(r, c, std, rng);
        Self {
            visible_bias: Array1::zeros(dims.visible),
            hidden_bias: Array1::zeros(dims.hidden),
            coupling: FactoredCoupling {
                visible: g(dims.visible, factors.coupling),
                hidden: g(dims.hidden, factors.coupling),
                feature: g(dims.feature, factors.coupling),
            },
            visible_gate: FactoredGate {
                unit: g(dims.visible, factors.visible_gate),
                context: g(dims.context, factors.visible_gate),
                feature: g(dims.feature, factors.visible_gate),
            },
            hidden_gate: FactoredGate {
                unit: g(dims.hidden, factors.hidden_gate),
                context: g(dims.context, factors.hidden_gate),
                feature: g(dims.feature, factors.hidden_gate),
            },
        }
    }

    pub fn factors(&self) -> FactorDims {
        FactorDims {
            coupling: self.coupling.visible.ncols(),
            visible_gate: self.visible_gate.unit.ncols(),
            hidden_gate: self.hidden_gate.unit.ncols(),
        }
    }
}

/// Standard deviation of the initial weights.
pub const INIT_WEIGHT_STD: f64 = 0.01;

impl ModelParams {
    /// Freshly initialized parameters: N(0, 0.01²) weights, zero biases.
    pub fn init(
        kind: ModelKind,
        dims: UnitDims,
        factors: FactorDims,
        rng: &mut impl Rng,
    ) -> Result<Self, EbmError> {
        let params = match kind {
            ModelKind::Rbm => {
                ModelParams::Rbm(RbmParams::random(dims.visible, dims.hidden, INIT_WEIGHT_STD, rng))
            }
            ModelKind::Crbm => ModelParams::Crbm(CrbmParams::random(
                dims.visible,
                dims.hidden,
                dims.context,
                INIT_WEIGHT_STD,
                rng,
            )),
            ModelKind::Fgcrbm => {
                if factors.coupling == 0 || factors.visible_gate == 0 || factors.hidden_gate == 0 {
                    return Err(EbmError::Config("factor counts must be at least 1".into()));
                }
                ModelParams::Fgcrbm(FgcrbmParams::random(dims, factors, INIT_WEIGHT_STD, rng))
            }
        };
        params.validate()?;
        Ok(params)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Rbm(_) => ModelKind::Rbm,
            ModelParams::Crbm(_) => ModelKind::Crbm,
            ModelParams::Fgcrbm(_) => ModelKind::Fgcrbm,
        }
    }

    pub fn dims(&self) -> UnitDims {
        match self {
            ModelParams::Rbm(p) => UnitDims {
                visible: p.n_visible(),
                hidden: p.n_hidden(),
                context: 0,
                feature: 0,
            },
            ModelParams::Crbm(p) => UnitDims {
                visible: p.base.n_visible(),
                hidden: p.base.n_hidden(),
                context: p.n_context(),
                feature: 0,
            },
            ModelParams::Fgcrbm(p) => UnitDims {
                visible: p.visible_bias.len(),
                hidden: p.hidden_bias.len(),
                context: p.visible_gate.context.nrows(),
                feature: p.coupling.feature.nrows(),
            },
        }
    }

    pub fn factors(&self) -> Option<FactorDims> {
        match self {
            ModelParams::Fgcrbm(p) => Some(p.factors()),
            _ => None,
        }
    }

    /// Named views of every learnable tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, ArrayViewD<'_, f64>)> {
        match self {
            ModelParams::Rbm(p) => vec![
                ("weights", p.weights.view().into_dyn()),
                ("visible_bias", p.visible_bias.view().into_dyn()),
                ("hidden_bias", p.hidden_bias.view().into_dyn()),
            ],
            ModelParams::Crbm(p) => vec![
                ("weights", p.base.weights.view().into_dyn()),
                ("visible_bias", p.base.visible_bias.view().into_dyn()),
                ("hidden_bias", p.base.hidden_bias.view().into_dyn()),
                ("context_visible", p.context_visible.view().into_dyn()),
                ("context_hidden", p.context_hidden.view().into_dyn()),
            ],
            ModelParams::Fgcrbm(p) => vec![
                ("visible_bias", p.visible_bias.view().into_dyn()),
                ("hidden_bias", p.hidden_bias.view().into_dyn()),
                ("coupling.visible", p.coupling.visible.view().into_dyn()),
                ("coupling.hidden", p.coupling.hidden.view().into_dyn()),
                ("coupling.feature", p.coupling.feature.view().into_dyn()),
                ("visible_gate.unit", p.visible_gate.unit.view().into_dyn()),
                ("visible_gate.context", p.visible_gate.context.view().into_dyn()),
                ("visible_gate.feature", p.visible_gate.feature.view().into_dyn()),
                ("hidden_gate.unit", p.hidden_gate.unit.view().into_dyn()),
                ("hidden_gate.context", p.hidden_gate.context.view().into_dyn()),
                ("hidden_gate.feature", p.hidden_gate.feature.view().into_dyn()),
            ],
        }
    }

    /// Mutable counterpart of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, ArrayViewMutD<'_, f64>)> {
        match self {
            ModelParams::Rbm(p) => vec![
                ("weights", p.weights.view_mut().into_dyn()),
                ("visible_bias", p.visible_bias.view_mut().into_dyn()),
                ("hidden_bias", p.hidden_bias.view_mut().into_dyn()),
            ],
            ModelParams::Crbm(p) => vec![
                ("weights", p.base.weights.view_mut().into_dyn()),
                ("visible_bias", p.base.visible_bias.view_mut().into_dyn()),
                ("hidden_bias", p.base.hidden_bias.view_mut().into_dyn()),
                ("context_visible", p.context_visible.view_mut().into_dyn()),
                ("context_hidden", p.context_hidden.view_mut().into_dyn()),
            ],
            ModelParams::Fgcrbm(p) => vec![
                ("visible_bias", p.visible_bias.view_mut().into_dyn()),
                ("hidden_bias", p.hidden_bias.view_mut().into_dyn()),
                ("coupling.visible", p.coupling.visible.view_mut().into_dyn()),
                ("coupling.hidden", p.coupling.hidden.view_mut().into_dyn()),
                ("coupling.feature", p.coupling.feature.view_mut().into_dyn()),
                ("visible_gate.unit", p.visible_gate.unit.view_mut().into_dyn()),
                ("visible_gate.context", p.visible_gate.context.view_mut().into_dyn()),
                ("visible_gate.feature", p.visible_gate.feature.view_mut().into_dyn()),
                ("hidden_gate.unit", p.hidden_gate.unit.view_mut().into_dyn()),
                ("hidden_gate.context", p.hidden_gate.context.view_mut().into_dyn()),
                ("hidden_gate.feature", p.hidden_gate.feature.view_mut().into_dyn()),
            ],
        }
    }

    /// All-zero parameters of identical kind and shape.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Checks that every tensor agrees with the unit and factor counts.
    pub fn validate(&self) -> Result<(), EbmError> {
        let d = self.dims();
        let check = |name: &str, got: &[usize], want: &[usize]| {
            if got == want {
                Ok(())
            } else {
                Err(EbmError::Shape(format!("{name}: shape {got:?}, expected {want:?}")))
            }
        };
        match self {
            ModelParams::Rbm(p) => {
                check("weights", p.weights.shape(), &[d.visible, d.hidden])?;
            }
            ModelParams::Crbm(p) => {
                check("weights", p.base.weights.shape(), &[d.visible, d.hidden])?;
                check("context_visible", p.context_visible.shape(), &[d.context, d.visible])?;
                check("context_hidden", p.context_hidden.shape(), &[d.context, d.hidden])?;
            }
            ModelParams::Fgcrbm(p) => {
                let f = p.factors();
                if f.coupling == 0 || f.visible_gate == 0 || f.hidden_gate == 0 {
                    return Err(EbmError::Shape("factor counts must be at least 1".into()));
                }
                check("coupling.visible", p.coupling.visible.shape(), &[d.visible, f.coupling])?;
                check("coupling.hidden", p.coupling.hidden.shape(), &[d.hidden, f.coupling])?;
                check("coupling.feature", p.coupling.feature.shape(), &[d.feature, f.coupling])?;
                check("visible_gate.unit", p.visible_gate.unit.shape(), &[d.visible, f.visible_gate])?;
                check("visible_gate.context", p.visible_gate.context.shape(), &[d.context, f.visible_gate])?;
                check("visible_gate.feature", p.visible_gate.feature.shape(), &[d.feature, f.visible_gate])?;
                check("hidden_gate.unit", p.hidden_gate.unit.shape(), &[d.hidden, f.hidden_gate])?;
                check("hidden_gate.context", p.hidden_gate.context.shape(), &[d.context, f.hidden_gate])?;
                check("hidden_gate.feature", p.hidden_gate.feature.shape(), &[d.feature, f.hidden_gate])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_has_small_weights_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = UnitDims { visible: 40, hidden: 50, context: 0, feature: 0 };
        let p = ModelParams::init(ModelKind::Rbm, dims, FactorDims::uniform(1), &mut rng).unwrap();
        let ModelParams::Rbm(r) = &p else { unreachable!() };
        let n = r.weights.len() as f64;
        let mean = r.weights.sum() / n;
        let std = (r.weights.mapv(|w| (w - mean).powi(2)).sum() / n).sqrt();
        assert!(mean.abs() < 2e-3 && (std - 0.01).abs() < 1e-3, "mean {mean} std {std}");
        assert!(r.visible_bias.iter().chain(r.hidden_bias.iter()).all(|&b| b == 0.0));
    }

    #[test]
    fn fgcrbm_needs_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = UnitDims { visible: 2, hidden: 2, context: 2, feature: 2 };
        assert!(ModelParams::init(ModelKind::Fgcrbm, dims, FactorDims::uniform(0), &mut rng).is_err());
        let p = ModelParams::init(ModelKind::Fgcrbm, dims, FactorDims::uniform(3), &mut rng).unwrap();
        assert_eq!(p.dims(), dims);
        assert_eq!(p.tensors().len(), 11);
    }

    #[test]
    fn validate_catches_inconsistent_shapes() {
        let mut p = CrbmParams::zeros(3, 2, 4);
        p.context_hidden = Array2::zeros((4, 3));
        assert!(ModelParams::Crbm(p).validate().is_err());
    }
}
