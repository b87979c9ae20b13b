use std::sync::Arc;

use ndarray::{s, Array1, Array2, Axis};

use super::mlp::{self, Mlp, MlpDims, TrainHistory};
use super::ridge::{fit_ridge, LinearMap};
use super::windows::{Layout, WindowSet};
use super::{Family, ModelConfig};
use crate::error::{Error, Result};
use crate::plugin::PluginForecaster;

/// Version of the binary model format written by [`ForecasterHandle::to_bytes`].
pub const MODEL_FORMAT_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"SWBM";

#[derive(Debug, Clone)]
pub enum Model {
    Persistence,
    SeasonalNaive {
        period: usize,
    },
    LinearDirect(LinearMap),
    /// One-step map over `[flattened inputs, future covariates at the step]`.
    LinearRecursive(LinearMap),
    Mlp(Mlp),
    Plugin(Arc<PluginForecaster>),
}

/// A fitted forecaster. Immutable once built.
#[derive(Debug, Clone)]
pub struct ForecasterHandle {
    pub family: Family,
    pub layout: Layout,
    pub seed: u64,
    pub model: Model,
    /// Epoch losses, for trained families.
    pub history: Option<TrainHistory>,
}

impl ForecasterHandle {
    pub fn persistence(layout: Layout) -> Self {
        Self::from_parts(Family::Persistence, layout, 0, Model::Persistence)
    }

    pub fn seasonal_naive(layout: Layout, period: usize) -> Self {
        Self::from_parts(
            Family::SeasonalNaive,
            layout,
            0,
            Model::SeasonalNaive { period },
        )
    }

    /// A direct model with explicit coefficients (`[direct_features, horizon]`).
    pub fn linear_direct(layout: Layout, map: LinearMap) -> Result<Self> {
        if map.n_features() != layout.direct_features() || map.n_outputs() != layout.horizon {
            return Err(Error::SchemaMismatch(
                "linear map does not fit the layout".into(),
            ));
        }
        Ok(Self::from_parts(
            Family::LinearDirect,
            layout,
            0,
            Model::LinearDirect(map),
        ))
    }

    /// A recursive model with explicit one-step coefficients (`[step_features, 1]`).
    pub fn linear_recursive(layout: Layout, map: LinearMap) -> Result<Self> {
        if map.n_features() != layout.step_features() || map.n_outputs() != 1 {
            return Err(Error::SchemaMismatch(
                "one-step map does not fit the layout".into(),
            ));
        }
        Ok(Self::from_parts(
            Family::LinearRecursive,
            layout,
            0,
            Model::LinearRecursive(map),
        ))
    }

    pub fn from_plugin(layout: Layout, plugin: Arc<PluginForecaster>) -> Self {
        Self::from_parts(Family::ExternalPlugin, layout, 0, Model::Plugin(plugin))
    }

    fn from_parts(family: Family, layout: Layout, seed: u64, model: Model) -> Self {
        Self {
            family,
            layout,
            seed,
            model,
            history: None,
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.model {
            Model::Persistence | Model::SeasonalNaive { .. } | Model::Plugin(_) => 0,
            Model::LinearDirect(m) | Model::LinearRecursive(m) => m.param_count(),
            Model::Mlp(m) => m.dims.param_count(),
        }
    }

    /// Size of the serialized model in bytes; plugins report their own size.
    pub fn serialized_size(&self) -> usize {
        match &self.model {
            Model::Plugin(p) => p.capabilities().model_size_bytes as usize,
            _ => self.to_bytes().map(|b| b.len()).unwrap_or(0),
        }
    }

    /// Binary encoding, all integers and floats little-endian:
    ///
    /// ```text
    /// "SWBM" u16 version  u8 family  u64 seed
    /// u32 input_len  u32 horizon
    /// u32 n_past  (u16 len, utf8)*  u32 n_future  (u16 len, utf8)*
    /// u32 target_indicator + 1 (0 = none)
    /// u32 extra (seasonal period / hidden width / 0)
    /// u64 n_values  f64 values*
    /// ```
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (extra, values) = match &self.model {
            Model::Persistence => (0, Vec::new()),
            Model::SeasonalNaive { period } => (*period as u32, Vec::new()),
            Model::LinearDirect(m) | Model::LinearRecursive(m) => (0, m.to_flat()),
            Model::Mlp(m) => (m.dims.hidden as u32, m.to_flat()),
            Model::Plugin(_) => {
                return Err(Error::InvalidArgument(
                    "external plugins hold their own parameters".into(),
                ))
            }
        };
        let l = &self.layout;
        let mut out = Vec::with_capacity(64 + 8 * values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.push(self.family.tag());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(l.input_len as u32).to_le_bytes());
        out.extend_from_slice(&(l.horizon as u32).to_le_bytes());
        for names in [&l.past, &l.future] {
            out.extend_from_slice(&(names.len() as u32).to_le_bytes());
            for n in names {
                out.extend_from_slice(&(n.len() as u16).to_le_bytes());
                out.extend_from_slice(n.as_bytes());
            }
        }
        let ti = l.target_indicator.map_or(0, |i| i as u32 + 1);
        out.extend_from_slice(&ti.to_le_bytes());
        out.extend_from_slice(&extra.to_le_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Parse("not a model file".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {version}"
            )));
        }
        let family = Family::from_tag(r.take(1)?[0])
            .ok_or_else(|| Error::Parse("unknown family tag".into()))?;
        let seed = u64::from_le_bytes(r.array()?);
        let input_len = r.u32()? as usize;
        let horizon = r.u32()? as usize;
        let past = r.names()?;
        let future = r.names()?;
        let target_indicator = match r.u32()? {
            0 => None,
            i => Some(i as usize - 1),
        };
        let extra = r.u32()? as usize;
        let n = u64::from_le_bytes(r.array()?) as usize;
        let values = (0..n)
            .map(|_| r.array().map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Parse("trailing bytes after model".into()));
        }
        let layout = Layout {
            input_len,
            horizon,
            past,
            future,
            target_indicator,
        };
        let model = match family {
            Family::Persistence => Model::Persistence,
            Family::SeasonalNaive => Model::SeasonalNaive { period: extra },
            Family::LinearDirect => Model::LinearDirect(LinearMap::from_flat(
                layout.direct_features(),
                horizon,
                &values,
            )?),
            Family::LinearRecursive => {
                Model::LinearRecursive(LinearMap::from_flat(layout.step_features(), 1, &values)?)
            }
            Family::MlpDirect => Model::Mlp(Mlp::from_flat(
                MlpDims {
                    inputs: layout.direct_features(),
                    hidden: extra,
                    outputs: horizon,
                },
                &values,
            )?),
            Family::ExternalPlugin => {
                return Err(Error::Parse("plugin handles are not serializable".into()))
            }
        };
        Ok(Self::from_parts(family, layout, seed, model))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Parse("truncated model file".into()))?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn names(&mut self) -> Result<Vec<String>> {
        let n = self.u32()?;
        (0..n)
            .map(|_| {
                let len = u16::from_le_bytes(self.array()?) as usize;
                String::from_utf8(self.take(len)?.to_vec())
                    .map_err(|_| Error::Parse("channel name is not utf-8".into()))
            })
            .collect()
    }
}

/// Design matrix and targets of the windows with fully observed targets.
fn complete(windows: &WindowSet) -> WindowSet {
    let rows = windows.complete_rows();
    if rows.len() == windows.len() {
        windows.clone()
    } else {
        windows.select(&rows)
    }
}

/// One-step training pairs: flattened inputs plus the first future row.
fn step_design(windows: &WindowSet) -> Array2<f64> {
    let l = &windows.layout;
    let d_in = l.input_len * l.n_past();
    let mut x = Array2::zeros((windows.len(), l.step_features()));
    for w in 0..windows.len() {
        let mut row = x.row_mut(w);
        for (dst, src) in row
            .iter_mut()
            .zip(windows.inputs.index_axis(Axis(0), w).iter())
        {
            *dst = *src;
        }
        for (dst, src) in row
            .iter_mut()
            .skip(d_in)
            .zip(windows.future.slice(s![w, 0, ..]).iter())
        {
            *dst = *src;
        }
    }
    x
}

pub fn fit(
    family: Family,
    train: &WindowSet,
    val: &WindowSet,
    cfg: &ModelConfig,
) -> Result<ForecasterHandle> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    if !val.is_empty() && val.layout != train.layout {
        return Err(Error::SchemaMismatch(
            "train and validation layouts differ".into(),
        ));
    }
    let layout = train.layout.clone();
    let seed = cfg.train.seed;
    let mut history = None;
    let model =
        match family {
            Family::Persistence => Model::Persistence,
            Family::SeasonalNaive => {
                if cfg.season == 0 {
                    return Err(Error::InvalidArgument("season must be positive".into()));
                }
                Model::SeasonalNaive { period: cfg.season }
            }
            Family::LinearDirect => {
                let t = complete(train);
                Model::LinearDirect(fit_ridge(
                    t.direct_design().view(),
                    t.targets.view(),
                    cfg.ridge_lambda,
                )?)
            }
            Family::LinearRecursive => {
                let t = complete(train);
                let y = t.targets.slice(s![.., 0..1]);
                Model::LinearRecursive(fit_ridge(step_design(&t).view(), y, cfg.ridge_lambda)?)
            }
            Family::MlpDirect => {
                let t = complete(train);
                let v = complete(val);
                let mut train_cfg = cfg.train;
                train_cfg.batch_size = train_cfg.batch_size.max(1);
                let (m, h) = mlp::train(
                    t.direct_design().view(),
                    t.targets.view(),
                    v.direct_design().view(),
                    v.targets.view(),
                    cfg.hidden,
                    &train_cfg,
                )?;
                history = Some(h);
                Model::Mlp(m)
            }
            Family::ExternalPlugin => return Err(Error::InvalidArgument(
                "external plugins arrive trained; attach them with ForecasterHandle::from_plugin"
                    .into(),
            )),
        };
    let mut handle = ForecasterHandle::from_parts(family, layout, seed, model);
    handle.history = history;
    Ok(handle)
}

pub fn predict(handle: &ForecasterHandle, windows: &WindowSet) -> Result<Array2<f64>> {
    if handle.layout != windows.layout {
        return Err(Error::SchemaMismatch(format!(
            "model expects inputs {:?} / future {:?}, windows carry {:?} / {:?}",
            handle.layout.past, handle.layout.future, windows.layout.past, windows.layout.future
        )));
    }
    let n = windows.len();
    let h = handle.layout.horizon;
    Ok(match &handle.model {
        Model::Persistence => Array2::from_shape_fn((n, h), |(w, _)| windows.last_target(w)),
        Model::SeasonalNaive { period } => seasonal_naive(windows, *period),
        Model::LinearDirect(m) => m.apply(windows.direct_design().view()),
        Model::LinearRecursive(m) => recursive(windows, m),
        Model::Mlp(m) => m.predict(windows.direct_design().view()),
        Model::Plugin(p) => p.predict(windows)?,
    })
}

fn seasonal_naive(windows: &WindowSet, period: usize) -> Array2<f64> {
    let l = windows.layout.input_len;
    let h = windows.layout.horizon;
    let mut out = Array2::zeros((windows.len(), h));
    for w in 0..windows.len() {
        for s in 0..h {
            // predicted time sits at input position l + s
            let back = l + s;
            out[[w, s]] = if s >= period {
                out[[w, s - period]]
            } else if back >= period && back - period < l {
                windows.inputs[[w, back - period, 0]]
            } else {
                windows.last_target(w)
            };
        }
    }
    out
}

/// Roll the one-step map forward `horizon` times. Non-target history
/// channels repeat their last observed value; the target's imputation flag
/// (if any) is cleared for predicted steps.
fn recursive(windows: &WindowSet, m: &LinearMap) -> Array2<f64> {
    let l = &windows.layout;
    let (len, width) = (l.input_len, l.n_past());
    let d_in = len * width;
    let mut out = Array2::zeros((windows.len(), l.horizon));
    let mut feat = Array1::zeros(l.step_features());
    for w in 0..windows.len() {
        let mut history: Vec<f64> = windows
            .inputs
            .index_axis(Axis(0), w)
            .iter()
            .copied()
            .collect();
        for s in 0..l.horizon {
            feat.as_slice_mut().unwrap()[..d_in].copy_from_slice(&history);
            for (k, v) in windows.future.slice(s![w, s, ..]).iter().enumerate() {
                feat[d_in + k] = *v;
            }
            let y = m.apply_one(feat.view())[0];
            out[[w, s]] = y;
            let mut next = history[d_in - width..].to_vec();
            next[0] = y;
            if let Some(flag) = l.target_indicator {
                next[flag] = 0.0;
            }
            history.drain(..width);
            history.extend(next);
        }
    }
    out
}
