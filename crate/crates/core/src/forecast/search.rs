//! Small random hyperparameter search scored on validation MSE.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::handle::{fit, predict};
use super::windows::WindowSet;
use super::{Family, ModelConfig};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub ridge_lambda: Vec<f64>,
    pub hidden: Vec<usize>,
    pub lr: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            ridge_lambda: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            hidden: vec![16, 32, 64, 128],
            lr: vec![3e-4, 1e-3, 3e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: ModelConfig,
    pub best_val_mse: f64,
    /// Every sampled configuration with its validation MSE, in draw order.
    pub trials: Vec<(ModelConfig, f64)>,
}

/// Sample `trials` configurations from `grid` around `base`, keep the one
/// with the lowest validation MSE. Ties go to the earlier draw.
pub fn random_search(
    family: Family,
    train: &WindowSet,
    val: &WindowSet,
    base: &ModelConfig,
    grid: &SearchGrid,
    trials: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if trials == 0 || val.is_empty() {
        return Err(Error::InvalidArgument(
            "search needs trials and validation windows".into(),
        ));
    }
    let mut draw = rng::stream(seed, &["search", family.name()]);
    let mut results = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut cfg = *base;
        if let Some(l) = grid.ridge_lambda.choose(&mut draw) {
            cfg.ridge_lambda = *l;
        }
        if let Some(h) = grid.hidden.choose(&mut draw) {
            cfg.hidden = *h;
        }
        if let Some(lr) = grid.lr.choose(&mut draw) {
            cfg.train.adam.lr = *lr;
        }
        let handle = fit(family, train, val, &cfg)?;
        let pred = predict(&handle, val)?;
        let score = crate::evaluate::mse(&pred, &val.targets)?;
        results.push((cfg, score));
    }
    let (best, best_val_mse) = results
        .iter()
        .fold(None::<(ModelConfig, f64)>, |acc, (c, s)| match acc {
            Some((_, b)) if b <= *s => acc,
            _ => Some((*c, *s)),
        })
        .expect("trials > 0");
    Ok(SearchOutcome {
        best,
        best_val_mse,
        trials: results,
    })
}
