//! Brute-force reference computations, written with plain loops and
//! independent of the library's kernels. Shared by several test targets.
#![allow(dead_code)]

use lop_core::ebm::{Context, CrbmParams, FactorDims, FgcrbmParams, ModelKind, ModelParams, RbmParams, UnitDims};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn bits(index: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((index >> i) & 1) as f64).collect()
}

fn gauss2(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Array2<f64> {
    let n = Normal::new(0.0, std).unwrap();
    Array2::from_shape_simple_fn((rows, cols), || n.sample(rng))
}

fn gauss1(len: usize, std: f64, rng: &mut impl Rng) -> Array1<f64> {
    let n = Normal::new(0.0, std).unwrap();
    Array1::from_shape_simple_fn(len, || n.sample(rng))
}

fn binary(len: usize, rng: &mut impl Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || if rng.random::<bool>() { 1.0 } else { 0.0 })
}

/// A random instance with every tensor (biases included) drawn N(0, std²),
/// and a matching random binary context.
pub fn random_instance(kind: ModelKind, n_v: usize, n_h: usize, rng: &mut impl Rng) -> (ModelParams, Context) {
    let std = 1.0;
    match kind {
        ModelKind::Rbm => {
            let p = RbmParams {
                weights: gauss2(n_v, n_h, std, rng),
                visible_bias: gauss1(n_v, std, rng),
                hidden_bias: gauss1(n_h, std, rng),
            };
            (ModelParams::Rbm(p), Context::Unconditioned)
        }
        ModelKind::Crbm => {
            let n_x = rng.random_range(1..5);
            let p = CrbmParams {
                base: RbmParams {
                    weights: gauss2(n_v, n_h, std, rng),
                    visible_bias: gauss1(n_v, std, rng),
                    hidden_bias: gauss1(n_h, std, rng),
                },
                context_visible: gauss2(n_x, n_v, std, rng),
                context_hidden: gauss2(n_x, n_h, std, rng),
            };
            (ModelParams::Crbm(p), Context::Conditional(binary(n_x, rng)))
        }
        ModelKind::Fgcrbm => {
            let dims = UnitDims {
                visible: n_v,
                hidden: n_h,
                context: rng.random_range(1..5),
                feature: rng.random_range(1..5),
            };
            let factors = FactorDims {
                coupling: rng.random_range(1..4),
                visible_gate: rng.random_range(1..4),
                hidden_gate: rng.random_range(1..4),
            };
            let mut p = FgcrbmParams::random(dims, factors, std, rng);
            p.visible_bias = gauss1(n_v, std, rng);
            p.hidden_bias = gauss1(n_h, std, rng);
            let ctx = Context::Gated {
                context: binary(dims.context, rng),
                feature: binary(dims.feature, rng),
            };
            (ModelParams::Fgcrbm(p), ctx)
        }
    }
}

/// `(static-or-dynamic visible bias, hidden bias, pairwise weight(i, j))` for
/// the free units, computed with explicit sums.
pub struct Naive {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

pub fn naive(params: &ModelParams, ctx: &Context) -> Naive {
    match (params, ctx) {
        (ModelParams::Rbm(p), Context::Unconditioned) => Naive {
            a: p.visible_bias.to_vec(),
            b: p.hidden_bias.to_vec(),
            w: (0..p.weights.nrows()).map(|i| p.weights.row(i).to_vec()).collect(),
        },
        (ModelParams::Rbm(p), Context::Inpaint(known)) => {
            let k = known.len();
            let (n_v, n_h) = p.weights.dim();
            let mut b = p.hidden_bias.to_vec();
            for (j, bj) in b.iter_mut().enumerate() {
                for i in 0..k {
                    *bj += known[i] * p.weights[[i, j]];
                }
            }
            Naive {
                a: (k..n_v).map(|i| p.visible_bias[i]).collect(),
                b,
                w: (k..n_v).map(|i| (0..n_h).map(|j| p.weights[[i, j]]).collect()).collect(),
            }
        }
        (ModelParams::Crbm(p), Context::Conditional(x)) => {
            let (n_v, n_h) = p.base.weights.dim();
            let a = (0..n_v)
                .map(|i| p.base.visible_bias[i] + (0..x.len()).map(|k| p.context_visible[[k, i]] * x[k]).sum::<f64>())
                .collect();
            let b = (0..n_h)
                .map(|j| p.base.hidden_bias[j] + (0..x.len()).map(|k| p.context_hidden[[k, j]] * x[k]).sum::<f64>())
                .collect();
            Naive {
                a,
                b,
                w: (0..n_v).map(|i| p.base.weights.row(i).to_vec()).collect(),
            }
        }
        (ModelParams::Fgcrbm(p), Context::Gated { context: x, feature: z }) => {
            let n_v = p.visible_bias.len();
            let n_h = p.hidden_bias.len();
            // triple sums over factor, context unit and feature unit
            let gated = |unit: &Array2<f64>, cx: &Array2<f64>, fz: &Array2<f64>, i: usize| {
                let mut s = 0.0;
                for f in 0..unit.ncols() {
                    for k in 0..x.len() {
                        for l in 0..z.len() {
                            s += unit[[i, f]] * cx[[k, f]] * x[k] * fz[[l, f]] * z[l];
                        }
                    }
                }
                s
            };
            let vg = &p.visible_gate;
            let hg = &p.hidden_gate;
            let a = (0..n_v).map(|i| p.visible_bias[i] + gated(&vg.unit, &vg.context, &vg.feature, i)).collect();
            let b = (0..n_h).map(|j| p.hidden_bias[j] + gated(&hg.unit, &hg.context, &hg.feature, j)).collect();
            let c = &p.coupling;
            let w = (0..n_v)
                .map(|i| {
                    (0..n_h)
                        .map(|j| {
                            let mut s = 0.0;
                            for f in 0..c.visible.ncols() {
                                for l in 0..z.len() {
                                    s += c.visible[[i, f]] * c.hidden[[j, f]] * c.feature[[l, f]] * z[l];
                                }
                            }
                            s
                        })
                        .collect()
                })
                .collect();
            Naive { a, b, w }
        }
        _ => panic!("context does not fit the model"),
    }
}

impl Naive {
    pub fn n_v(&self) -> usize {
        self.a.len()
    }

    pub fn n_h(&self) -> usize {
        self.b.len()
    }

    pub fn energy(&self, v: &[f64], h: &[f64]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.n_v() {
            e -= self.a[i] * v[i];
            for j in 0..self.n_h() {
                e -= v[i] * self.w[i][j] * h[j];
            }
        }
        for j in 0..self.n_h() {
            e -= self.b[j] * h[j];
        }
        e
    }

    /// `Z` by plain summation over every `(v, h)`.
    pub fn partition(&self) -> f64 {
        let mut z = 0.0;
        for vi in 0..1usize << self.n_v() {
            for hi in 0..1usize << self.n_h() {
                z += (-self.energy(&bits(vi, self.n_v()), &bits(hi, self.n_h()))).exp();
            }
        }
        z
    }

    /// `p(v)` per visible configuration.
    pub fn visible_marginal(&self) -> Vec<f64> {
        let z = self.partition();
        (0..1usize << self.n_v())
            .map(|vi| {
                let v = bits(vi, self.n_v());
                (0..1usize << self.n_h())
                    .map(|hi| (-self.energy(&v, &bits(hi, self.n_h()))).exp())
                    .sum::<f64>()
                    / z
            })
            .collect()
    }

    /// `p(h_j = 1 | v)` as a ratio of sums over every `h`.
    pub fn cond_hidden(&self, v: &[f64]) -> Vec<f64> {
        let mut on = vec![0.0; self.n_h()];
        let mut total = 0.0;
        for hi in 0..1usize << self.n_h() {
            let h = bits(hi, self.n_h());
            let w = (-self.energy(v, &h)).exp();
            total += w;
            for j in 0..self.n_h() {
                on[j] += w * h[j];
            }
        }
        on.into_iter().map(|x| x / total).collect()
    }

    /// `p(v_i = 1 | h)` as a ratio of sums over every `v`.
    pub fn cond_visible(&self, h: &[f64]) -> Vec<f64> {
        let mut on = vec![0.0; self.n_v()];
        let mut total = 0.0;
        for vi in 0..1usize << self.n_v() {
            let v = bits(vi, self.n_v());
            let w = (-self.energy(&v, h)).exp();
            total += w;
            for i in 0..self.n_v() {
                on[i] += w * v[i];
            }
        }
        on.into_iter().map(|x| x / total).collect()
    }
}

/// Mean `−ln p(v)` of a plain RBM over `data`, by enumeration.
pub fn rbm_nll(params: &RbmParams, data: &[Array1<f64>]) -> f64 {
    let n = naive(&ModelParams::Rbm(params.clone()), &Context::Unconditioned);
    let marginal = n.visible_marginal();
    let index = |v: &Array1<f64>| v.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>();
    -data.iter().map(|v| marginal[index(v)].ln()).sum::<f64>() / data.len() as f64
}

/// `−∂NLL/∂W` of a plain RBM: data expectation of `v · p(h|v)ᵀ` minus the
/// model expectation of `v hᵀ`, both exact.
pub fn rbm_weight_ascent(params: &RbmParams, data: &[Array1<f64>]) -> Array2<f64> {
    let n = naive(&ModelParams::Rbm(params.clone()), &Context::Unconditioned);
    let (n_v, n_h) = (n.n_v(), n.n_h());
    let mut g = Array2::zeros((n_v, n_h));
    for v in data {
        let ph = n.cond_hidden(v.as_slice().unwrap());
        for i in 0..n_v {
            for j in 0..n_h {
                g[[i, j]] += v[i] * ph[j] / data.len() as f64;
            }
        }
    }
    let z = n.partition();
    for vi in 0..1usize << n_v {
        let v = bits(vi, n_v);
        for hi in 0..1usize << n_h {
            let h = bits(hi, n_h);
            let p = (-n.energy(&v, &h)).exp() / z;
            for i in 0..n_v {
                for j in 0..n_h {
                    g[[i, j]] -= p * v[i] * h[j];
                }
            }
        }
    }
    g
}

/// Draws `count` visible vectors from the exact marginal of `params`.
pub fn sample_exact(params: &RbmParams, count: usize, rng: &mut impl Rng) -> Vec<Array1<f64>> {
    let n = naive(&ModelParams::Rbm(params.clone()), &Context::Unconditioned);
    let marginal = n.visible_marginal();
    (0..count)
        .map(|_| {
            let mut u: f64 = rng.random();
            let mut idx = marginal.len() - 1;
            for (i, p) in marginal.iter().enumerate() {
                if u < *p {
                    idx = i;
                    break;
                }
                u -= p;
            }
            Array1::from(bits(idx, n.n_v()))
        })
        .collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub mod experiments;
