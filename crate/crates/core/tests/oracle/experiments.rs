//! Learning experiments measured against enumeration.

use lop_core::ebm::{CdConfig, ContrastiveDivergence, Context, FactorDims, ModelKind, ModelParams, RbmParams, TrainingExample, UnitDims};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{rbm_nll, rbm_weight_ascent, sample_exact};

pub struct CdRun {
    pub teacher_nll: f64,
    /// Exact NLL before training, then after every epoch.
    pub nll: Vec<f64>,
}

/// A low-entropy teacher: strong weights and negative visible biases.
pub fn teacher(n_v: usize, n_h: usize, rng: &mut impl Rng) -> RbmParams {
    let n = Normal::new(0.0, 2.0).unwrap();
    RbmParams {
        weights: Array2::from_shape_simple_fn((n_v, n_h), || n.sample(rng)),
        visible_bias: Array1::from_elem(n_v, -1.0),
        hidden_bias: Array1::zeros(n_h),
    }
}

/// CD-`k` on samples of a known RBM, tracking the exact data NLL.
pub fn cd_sanity(seed: u64, epochs: usize, k: usize) -> CdRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_v, n_h) = (6, 3);
    let teacher = teacher(n_v, n_h, &mut rng);
    let data = sample_exact(&teacher, 300, &mut rng);
    let teacher_nll = rbm_nll(&teacher, &data);
    let dims = UnitDims { visible: n_v, hidden: n_h, context: 0, feature: 0 };
    let mut params = ModelParams::init(ModelKind::Rbm, dims, FactorDims::uniform(1), &mut rng).unwrap();
    let examples: Vec<TrainingExample> = data
        .iter()
        .map(|v| TrainingExample { visible: v.clone(), context: Context::Unconditioned })
        .collect();
    let mut cd = ContrastiveDivergence::new(CdConfig { k, learning_rate: 0.1, momentum: 0.5, weight_decay: 0.0 }).unwrap();
    let as_rbm = |p: &ModelParams| match p {
        ModelParams::Rbm(r) => r.clone(),
        _ => unreachable!(),
    };
    let mut nll = vec![rbm_nll(&as_rbm(&params), &data)];
    for _ in 0..epochs {
        for batch in examples.chunks(30) {
            cd.update(&mut params, batch, &mut rng).unwrap();
        }
        nll.push(rbm_nll(&as_rbm(&params), &data));
    }
    CdRun { teacher_nll, nll }
}

/// Fraction of random trials in which a `k`-step CD weight statistic has a
/// positive inner product with the exact NLL descent direction.
pub fn gradient_direction(trials: usize, k: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut positive = 0;
    for _ in 0..trials {
        let (n_v, n_h) = (4, 3);
        let rbm = RbmParams {
            weights: Array2::from_shape_simple_fn((n_v, n_h), || normal.sample(&mut rng)),
            visible_bias: Array1::from_shape_simple_fn(n_v, || normal.sample(&mut rng)),
            hidden_bias: Array1::from_shape_simple_fn(n_h, || normal.sample(&mut rng)),
        };
        let data: Vec<Array1<f64>> = (0..5)
            .map(|_| Array1::from_shape_simple_fn(n_v, || f64::from(rng.random::<bool>() as u8)))
            .collect();
        let exact = rbm_weight_ascent(&rbm, &data);
        let batch: Vec<TrainingExample> = (0..100)
            .flat_map(|_| data.iter().map(|v| TrainingExample { visible: v.clone(), context: Context::Unconditioned }))
            .collect();
        let before = ModelParams::Rbm(rbm.clone());
        let mut after = before.clone();
        let mut cd = ContrastiveDivergence::new(CdConfig { k, learning_rate: 1.0, momentum: 0.0, weight_decay: 0.0 }).unwrap();
        cd.update(&mut after, &batch, &mut rng).unwrap();
        let (ModelParams::Rbm(a), ModelParams::Rbm(b)) = (&after, &before) else { unreachable!() };
        let estimate = &a.weights - &b.weights;
        if (&estimate * &exact).sum() > 0.0 {
            positive += 1;
        }
    }
    positive
}
