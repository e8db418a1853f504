use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.8, 0.1, 0.1];

/// File-level train / validation / test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub fractions: [f64; 3],
}

fn check_fractions(f: [f64; 3]) -> Result<(), Error> {
    if f.iter().any(|x| !x.is_finite() || *x < 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {f:?} must be non-negative and sum to 1")));
    }
    Ok(())
}

/// Shuffles `files` with `seed` and cuts them by `fractions`
/// (train, validation, test).
///
/// Validation and test sizes are rounded to the nearest file but get at least
/// one file whenever their fraction is nonzero; training takes the rest.
pub fn split_corpus(files: &[String], fractions: [f64; 3], seed: u64) -> Result<CorpusSplit, Error> {
    check_fractions(fractions)?;
    if files.len() < 3 {
        return Err(Error::Corpus(format!("a split needs at least 3 files, got {}", files.len())));
    }
    let mut shuffled = files.to_vec();
    shuffled.sort();
    shuffled.dedup();
    if shuffled.len() != files.len() {
        return Err(Error::Corpus("duplicate file names".into()));
    }
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = shuffled.len();
    let size = |f: f64| if f > 0.0 { ((n as f64 * f).round() as usize).max(1) } else { 0 };
    let n_val = size(fractions[1]);
    let n_test = size(fractions[2]);
    if n_val + n_test > n || (fractions[0] > 0.0 && n_val + n_test == n) {
        return Err(Error::Corpus(format!("{n} files are too few for fractions {fractions:?}")));
    }
    let test = shuffled.split_off(n - n_test);
    let validation = shuffled.split_off(n - n_test - n_val);
    if validation.is_empty() {
        log::warn!("the validation split is empty");
    }
    if test.is_empty() {
        log::warn!("the test split is empty");
    }
    Ok(CorpusSplit {
        train: shuffled,
        validation,
        test,
        fractions,
    })
}
