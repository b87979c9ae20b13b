//! One-hidden-layer tanh network mapping a flattened window to the whole
//! horizon, trained with Adam on MSE and early stopping on validation MSE.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpDims {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl MlpDims {
    /// Flat layout: `W1 [hidden x inputs]`, `b1`, `W2 [outputs x hidden]`, `b2`.
    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
    }

    fn split<'a>(
        &self,
        p: &'a [f64],
    ) -> (
        ArrayView2<'a, f64>,
        ArrayView1<'a, f64>,
        ArrayView2<'a, f64>,
        ArrayView1<'a, f64>,
    ) {
        let (w1, rest) = p.split_at(self.hidden * self.inputs);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.outputs * self.hidden);
        (
            ArrayView2::from_shape((self.hidden, self.inputs), w1).expect("layout"),
            ArrayView1::from(b1),
            ArrayView2::from_shape((self.outputs, self.hidden), w2).expect("layout"),
            ArrayView1::from(b2),
        )
    }
}

pub fn forward(dims: MlpDims, params: &[f64], x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (w1, b1, w2, b2) = dims.split(params);
    let a = (x.dot(&w1.t()) + &b1).mapv(f64::tanh);
    a.dot(&w2.t()) + &b2
}

/// Mean squared error over all cells of `y` and its gradient.
pub fn loss_and_gradient(
    dims: MlpDims,
    params: &[f64],
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> (f64, Vec<f64>) {
    let (w1, b1, w2, b2) = dims.split(params);
    let a = (x.dot(&w1.t()) + &b1).mapv(f64::tanh);
    let diff = a.dot(&w2.t()) + &b2 - y;
    let cells = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / cells;

    let g_out = diff * (2.0 / cells);
    let g_w2 = g_out.t().dot(&a);
    let g_b2 = g_out.sum_axis(Axis(0));
    let g_hidden = g_out.dot(&w2) * a.mapv(|v| 1.0 - v * v);
    let g_w1 = g_hidden.t().dot(&x);
    let g_b1 = g_hidden.sum_axis(Axis(0));

    let mut grad = Vec::with_capacity(dims.param_count());
    grad.extend(g_w1.iter());
    grad.extend(g_b1.iter());
    grad.extend(g_w2.iter());
    grad.extend(g_b2.iter());
    (loss, grad)
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<R: Rng + ?Sized>(dims: MlpDims, rng: &mut R) -> Vec<f64> {
    let mut p = vec![0.0; dims.param_count()];
    let r1 = (6.0 / (dims.inputs + dims.hidden) as f64).sqrt();
    let r2 = (6.0 / (dims.hidden + dims.outputs) as f64).sqrt();
    let n_w1 = dims.hidden * dims.inputs;
    let w2_start = n_w1 + dims.hidden;
    for v in &mut p[..n_w1] {
        *v = rng.random_range(-r1..r1);
    }
    for v in &mut p[w2_start..w2_start + dims.outputs * dims.hidden] {
        *v = rng.random_range(-r2..r2);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_epochs() -> usize {
    100
}
fn default_patience() -> usize {
    10
}
fn default_batch() -> usize {
    256
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            batch_size: default_batch(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "patience, epochs and batch size must be positive".into(),
            ));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {}",
                self.adam.lr
            )));
        }
        Ok(())
    }
}

/// Per-epoch losses of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean standardized training loss over the epoch's batches.
    pub train_loss: Vec<f64>,
    /// Validation MSE in target units after each epoch.
    pub val_mse: Vec<f64>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
}

/// Network plus the input/output standardization fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: MlpDims,
    pub params: Vec<f64>,
    pub x_mean: Array1<f64>,
    pub x_scale: Array1<f64>,
    pub y_mean: Array1<f64>,
    pub y_scale: Array1<f64>,
}

impl Mlp {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let z = (&x - &self.x_mean) / &self.x_scale;
        forward(self.dims, &self.params, z.view()) * &self.y_scale + &self.y_mean
    }

    /// Scalers followed by network parameters.
    pub fn to_flat(&self) -> Vec<f64> {
        self.x_mean
            .iter()
            .chain(self.x_scale.iter())
            .chain(self.y_mean.iter())
            .chain(self.y_scale.iter())
            .chain(self.params.iter())
            .copied()
            .collect()
    }

    pub fn from_flat(dims: MlpDims, flat: &[f64]) -> Result<Self> {
        let expected = 2 * dims.inputs + 2 * dims.outputs + dims.param_count();
        if flat.len() != expected {
            return Err(Error::SchemaMismatch(format!(
                "{} values for an MLP expecting {expected}",
                flat.len()
            )));
        }
        let (x_mean, rest) = flat.split_at(dims.inputs);
        let (x_scale, rest) = rest.split_at(dims.inputs);
        let (y_mean, rest) = rest.split_at(dims.outputs);
        let (y_scale, params) = rest.split_at(dims.outputs);
        Ok(Self {
            dims,
            params: params.to_vec(),
            x_mean: Array1::from(x_mean.to_vec()),
            x_scale: Array1::from(x_scale.to_vec()),
            y_mean: Array1::from(y_mean.to_vec()),
            y_scale: Array1::from(y_scale.to_vec()),
        })
    }
}

fn standardizer(m: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = m.mean_axis(Axis(0)).expect("non-empty");
    let scale = m
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    (mean, scale)
}

fn mse_between(a: &Array2<f64>, b: ArrayView2<'_, f64>) -> f64 {
    let n = a.len() as f64;
    a.iter()
        .zip(b.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

pub fn train(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    x_val: ArrayView2<'_, f64>,
    y_val: ArrayView2<'_, f64>,
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainHistory)> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    if x_val.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "early stopping needs validation windows".into(),
        ));
    }
    if hidden == 0 {
        return Err(Error::InvalidArgument(
            "hidden width must be positive".into(),
        ));
    }
    let dims = MlpDims {
        inputs: x.ncols(),
        hidden,
        outputs: y.ncols(),
    };
    let (x_mean, x_scale) = standardizer(x);
    let (y_mean, y_scale) = standardizer(y);
    let xs = (&x - &x_mean) / &x_scale;
    let ys = (&y - &y_mean) / &y_scale;

    let mut init_rng = rng::stream(cfg.seed, &["mlp", "init"]);
    let mut shuffle_rng = rng::stream(cfg.seed, &["mlp", "shuffle"]);
    let mut model = Mlp {
        dims,
        params: init_params(dims, &mut init_rng),
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    };
    let mut adam = Adam::new(cfg.adam, dims.param_count());
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_mse: Vec::new(),
        best_epoch: 0,
    };
    let mut best = (f64::INFINITY, model.params.clone());
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let bx = xs.select(Axis(0), chunk);
            let by = ys.select(Axis(0), chunk);
            let (loss, grad) = loss_and_gradient(dims, &model.params, bx.view(), by.view());
            adam.step(&mut model.params, &grad);
            total += loss;
            batches += 1;
        }
        history.train_loss.push(total / f64::from(batches));
        let val = mse_between(&model.predict(x_val), y_val);
        history.val_mse.push(val);
        if val < best.0 {
            best = (val, model.params.clone());
            history.best_epoch = epoch;
        } else if epoch - history.best_epoch >= cfg.patience {
            break;
        }
    }
    model.params = best.1;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dims_count() {
        let d = MlpDims {
            inputs: 1,
            hidden: 3,
            outputs: 1,
        };
        assert_eq!(d.param_count(), 10);
    }

    #[test]
    fn forward_hand_computed() {
        let d = MlpDims {
            inputs: 2,
            hidden: 1,
            outputs: 1,
        };
        // W1 = [0.5, -0.25], b1 = 0.1, W2 = [2], b2 = -1
        let p = [0.5, -0.25, 0.1, 2.0, -1.0];
        let out = forward(d, &p, array![[1.0, 2.0]].view());
        let expected = 2.0 * (0.5f64 - 0.5 + 0.1).tanh() - 1.0;
        assert!((out[[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn learns_a_smooth_map_and_stops_early() {
        let n = 400;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (j + 3)) % 17) as f64 / 8.0 - 1.0);
        let y = Array2::from_shape_fn((n, 2), |(i, k)| {
            (x[[i, 0]] * (k as f64 + 1.0)).sin() + 0.5 * x[[i, 1]]
        });
        let (xt, xv) = x.view().split_at(Axis(0), 300);
        let (yt, yv) = y.view().split_at(Axis(0), 300);
        let cfg = TrainConfig {
            adam: AdamConfig {
                lr: 1e-2,
                ..Default::default()
            },
            max_epochs: 300,
            patience: 10,
            batch_size: 32,
            seed: 4,
        };
        let (m, h) = train(xt, yt, xv, yv, 16, &cfg).unwrap();
        let best = h.val_mse[h.best_epoch];
        assert!(h.val_mse.iter().all(|v| *v >= best));
        assert!(best < 0.05, "validation MSE {best}");
        let pv = m.predict(xv);
        assert!((mse_between(&pv, yv) - best).abs() < 1e-12);
    }

    #[test]
    fn rejects_missing_validation() {
        let x = Array2::zeros((4, 1));
        let y = Array2::zeros((4, 1));
        let empty = Array2::zeros((0, 1));
        let r = train(
            x.view(),
            y.view(),
            empty.view(),
            empty.view(),
            4,
            &TrainConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
