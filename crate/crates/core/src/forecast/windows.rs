use ndarray::{Array2, Array3, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{is_missing, Role, TimeSeriesFrame};
use crate::preprocess::{make_placeholder_future, placeholder_name};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All channels plus future covariates.
    Global,
    /// Target history and the shifted-target placeholder only.
    Local,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Global => "global",
            Mode::Local => "local",
        }
    }
}

/// Geometry of the prediction problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastTask {
    #[serde(default = "defaults::input_len")]
    pub input_len: usize,
    #[serde(default = "defaults::horizon")]
    pub horizon: usize,
    #[serde(default = "defaults::mode")]
    pub mode: Mode,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
}

mod defaults {
    pub fn input_len() -> usize {
        72
    }
    pub fn horizon() -> usize {
        12
    }
    pub fn mode() -> super::Mode {
        super::Mode::Global
    }
    pub fn batch_size() -> usize {
        256
    }
}

impl Default for ForecastTask {
    fn default() -> Self {
        Self {
            input_len: defaults::input_len(),
            horizon: defaults::horizon(),
            mode: Mode::Global,
            batch_size: defaults::batch_size(),
        }
    }
}

impl ForecastTask {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len == 0 || self.horizon == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "input length, horizon and batch size must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn window_count(&self, len: usize) -> usize {
        (len + 1).saturating_sub(self.input_len + self.horizon)
    }
}

/// Which channels feed a model, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub input_len: usize,
    pub horizon: usize,
    /// History channels; the target is always first.
    pub past: Vec<String>,
    /// Covariates known over the forecast horizon.
    pub future: Vec<String>,
    /// Position of the target's imputation indicator within `past`.
    pub target_indicator: Option<usize>,
}

impl Layout {
    pub fn for_frame(frame: &TimeSeriesFrame, task: &ForecastTask) -> Result<Self> {
        let target = frame.target_name()?.to_string();
        let (past, future) = match task.mode {
            Mode::Global => {
                let mut past = vec![target.clone()];
                let mut future = Vec::new();
                for c in frame.channels() {
                    match c.role {
                        Role::PastCovariate | Role::ImputationIndicator => {
                            past.push(c.name.clone())
                        }
                        Role::FutureCovariate => future.push(c.name.clone()),
                        Role::Target => {}
                    }
                }
                (past, future)
            }
            Mode::Local => (vec![target.clone()], vec![placeholder_name(&target)]),
        };
        let target_indicator = frame
            .indicator_of(&target)
            .and_then(|i| past.iter().position(|n| *n == frame.channels()[i].name));
        Ok(Self {
            input_len: task.input_len,
            horizon: task.horizon,
            past,
            future,
            target_indicator,
        })
    }

    pub fn n_past(&self) -> usize {
        self.past.len()
    }

    pub fn n_future(&self) -> usize {
        self.future.len()
    }

    /// Length of a flattened direct-model feature vector.
    pub fn direct_features(&self) -> usize {
        self.input_len * self.n_past() + self.horizon * self.n_future()
    }

    /// Length of a flattened one-step feature vector.
    pub fn step_features(&self) -> usize {
        self.input_len * self.n_past() + self.n_future()
    }
}

/// Dense stride-1 sliding windows over one segment.
///
/// Window `w` ends at frame index `origins[w]`; its step `s` target is the
/// value at `origins[w] + 1 + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub layout: Layout,
    /// `[window, input_len, past channel]`
    pub inputs: Array3<f64>,
    /// `[window, horizon, future channel]`
    pub future: Array3<f64>,
    /// `[window, horizon]`, missing targets stay `NaN`.
    pub targets: Array2<f64>,
    pub origins: Vec<usize>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Flattened `[input rows..., future rows...]` features for a direct model.
    pub fn direct_design(&self) -> Array2<f64> {
        let n = self.len();
        let d_in = self.layout.input_len * self.layout.n_past();
        let d_fut = self.layout.horizon * self.layout.n_future();
        let mut x = Array2::zeros((n, d_in + d_fut));
        for w in 0..n {
            let mut row = x.row_mut(w);
            for (dst, src) in row
                .iter_mut()
                .zip(self.inputs.index_axis(Axis(0), w).iter())
            {
                *dst = *src;
            }
            for (dst, src) in row
                .iter_mut()
                .skip(d_in)
                .zip(self.future.index_axis(Axis(0), w).iter())
            {
                *dst = *src;
            }
        }
        x
    }

    /// Windows whose targets are fully observed.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&w| self.targets.row(w).iter().all(|v| !is_missing(*v)))
            .collect()
    }

    pub fn select(&self, rows: &[usize]) -> WindowSet {
        WindowSet {
            layout: self.layout.clone(),
            inputs: self.inputs.select(Axis(0), rows),
            future: self.future.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            origins: rows.iter().map(|&r| self.origins[r]).collect(),
        }
    }

    /// Last observed target value fed to each window.
    pub fn last_target(&self, w: usize) -> f64 {
        self.inputs[[w, self.layout.input_len - 1, 0]]
    }

    pub fn target_row(&self, w: usize) -> ArrayView1<'_, f64> {
        self.targets.row(w)
    }
}

/// Sliding windows over a segment.
///
/// Missing input cells are zero-filled; when the channel has an imputation
/// indicator among the inputs, that indicator is set to 1 at the same cell.
/// In local mode the placeholder covariate is derived on the fly if the
/// frame does not carry one.
pub fn build_windows(frame: &TimeSeriesFrame, task: &ForecastTask) -> Result<WindowSet> {
    build_windows_with_truth(frame, frame, task)
}

/// Like [`build_windows`], but targets come from `truth` (same shape as
/// `inputs`). Used to score models on corrupted inputs against clean targets.
pub fn build_windows_with_truth(
    inputs: &TimeSeriesFrame,
    truth: &TimeSeriesFrame,
    task: &ForecastTask,
) -> Result<WindowSet> {
    task.validate()?;
    if inputs.len() != truth.len() {
        return Err(Error::SchemaMismatch(
            "input and truth frames differ in length".into(),
        ));
    }
    let needed = task.input_len + task.horizon;
    if inputs.len() < needed {
        return Err(Error::InsufficientHistory {
            len: inputs.len(),
            needed,
        });
    }
    let owned;
    let frame = if task.mode == Mode::Local
        && inputs
            .index_of(&placeholder_name(inputs.target_name()?))
            .is_none()
    {
        owned = make_placeholder_future(inputs, task.horizon)?;
        &owned
    } else {
        inputs
    };
    let layout = Layout::for_frame(frame, task)?;
    let past: Vec<usize> = layout
        .past
        .iter()
        .map(|n| frame.require(n))
        .collect::<Result<_>>()?;
    let future: Vec<usize> = layout
        .future
        .iter()
        .map(|n| frame.require(n))
        .collect::<Result<_>>()?;
    // For each past slot, the past slot holding its indicator.
    let flag_slot: Vec<Option<usize>> = layout
        .past
        .iter()
        .map(|n| {
            frame.indicator_of(n).and_then(|i| {
                let name = &frame.channels()[i].name;
                layout.past.iter().position(|p| p == name)
            })
        })
        .collect();
    let truth_target = truth.column(truth.target_index()?);

    let count = task.window_count(frame.len());
    let (l, h) = (task.input_len, task.horizon);
    let mut x = Array3::zeros((count, l, past.len()));
    let mut f = Array3::zeros((count, h, future.len()));
    let mut y = Array2::zeros((count, h));
    let mut origins = Vec::with_capacity(count);
    for w in 0..count {
        let origin = w + l - 1;
        origins.push(origin);
        for step in 0..l {
            let t = w + step;
            for (slot, &c) in past.iter().enumerate() {
                let v = frame.value(c, t);
                if !is_missing(v) {
                    x[[w, step, slot]] = v;
                }
            }
            for (slot, &c) in past.iter().enumerate() {
                if let Some(flag) = flag_slot[slot] {
                    if is_missing(frame.value(c, t)) {
                        x[[w, step, flag]] = 1.0;
                    }
                }
            }
        }
        for s in 0..h {
            let t = origin + 1 + s;
            for (slot, &c) in future.iter().enumerate() {
                let v = frame.value(c, t);
                f[[w, s, slot]] = if is_missing(v) { 0.0 } else { v };
            }
            y[[w, s]] = truth_target[t];
        }
    }
    Ok(WindowSet {
        layout,
        inputs: x,
        future: f,
        targets: y,
        origins,
    })
}
