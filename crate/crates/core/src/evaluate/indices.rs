//! Consistency, complexity (CCI) and robustness (RI) indices.
//!
//! CCI_i = (t_i / max t + s_i / max s) / 2
//! RI_i  = (iqr_i / max iqr + pert_i / max pert + iqr_pert_i / max iqr_pert) / 3
//!
//! A component whose column is all zero contributes 0 to every model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sweep::{absolute_increases, EvalRecord};
use crate::error::{Error, Result};
use crate::forecast::Mode;
use crate::stats::{iqr, mean, median};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelKey {
    pub model_type: String,
    pub mode: Mode,
}

impl ModelKey {
    pub fn new(model_type: impl Into<String>, mode: Mode) -> Self {
        Self {
            model_type: model_type.into(),
            mode,
        }
    }
}

impl std::fmt::Display for ModelKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.model_type, self.mode.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub median_mse: f64,
    pub iqr_mse: f64,
    pub n_seeds: usize,
}

fn clean_mse_by_model(records: &[EvalRecord]) -> BTreeMap<ModelKey, Vec<(u64, f64)>> {
    let mut out: BTreeMap<ModelKey, Vec<(u64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_clean()) {
        if let Some(m) = r.mse {
            out.entry(ModelKey::new(&r.model_type, r.mode))
                .or_default()
                .push((r.seed, m));
        }
    }
    out
}

/// Median and IQR of clean MSE across seeds, per model.
pub fn consistency(records: &[EvalRecord]) -> Result<BTreeMap<ModelKey, Consistency>> {
    let grouped = clean_mse_by_model(records);
    if grouped.is_empty() {
        return Err(Error::InsufficientTrials("any model".into()));
    }
    let mut out = BTreeMap::new();
    for (key, mut seeds) in grouped {
        seeds.sort_by_key(|(s, _)| *s);
        seeds.dedup_by_key(|(s, _)| *s);
        if seeds.len() < 2 {
            return Err(Error::InsufficientTrials(key.to_string()));
        }
        let values: Vec<f64> = seeds.iter().map(|(_, m)| *m).collect();
        out.insert(
            key,
            Consistency {
                median_mse: median(&values).expect("non-empty"),
                iqr_mse: iqr(&values).expect("non-empty"),
                n_seeds: values.len(),
            },
        );
    }
    Ok(out)
}

/// Computation complexity index from (inference seconds, size) pairs.
pub fn cci(measurements: &[(f64, f64)]) -> Result<Vec<f64>> {
    if measurements.is_empty() {
        return Err(Error::InvalidMeasurement("no models".into()));
    }
    for (t, s) in measurements {
        if !(*t > 0.0 && t.is_finite() && *s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidMeasurement(format!("time {t}, size {s}")));
        }
    }
    let max_t = measurements.iter().map(|m| m.0).fold(f64::MIN, f64::max);
    let max_s = measurements.iter().map(|m| m.1).fold(f64::MIN, f64::max);
    Ok(measurements
        .iter()
        .map(|(t, s)| 0.5 * (t / max_t + s / max_s))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessComponents {
    pub iqr_clean: f64,
    pub mean_abs_increase: f64,
    pub iqr_abs_increase: f64,
}

/// Robustness index from per-model components.
pub fn ri(components: &[RobustnessComponents]) -> Result<Vec<f64>> {
    if components.is_empty() {
        return Err(Error::InvalidMeasurement("no models".into()));
    }
    for c in components {
        for v in [c.iqr_clean, c.mean_abs_increase, c.iqr_abs_increase] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidMeasurement(format!(
                    "robustness component {v}"
                )));
            }
        }
    }
    let column = |f: fn(&RobustnessComponents) -> f64| -> Vec<f64> {
        let max = components.iter().map(f).fold(0.0, f64::max);
        components
            .iter()
            .map(|c| if max > 0.0 { f(c) / max } else { 0.0 })
            .collect()
    };
    let a = column(|c| c.iqr_clean);
    let b = column(|c| c.mean_abs_increase);
    let d = column(|c| c.iqr_abs_increase);
    Ok((0..components.len())
        .map(|i| (a[i] + b[i] + d[i]) / 3.0)
        .collect())
}

/// RI components per model from sweep records. Every scored perturbation
/// cell weighs the same.
pub fn robustness_components(
    records: &[EvalRecord],
) -> Result<BTreeMap<ModelKey, RobustnessComponents>> {
    let cons = consistency(records)?;
    let increases = absolute_increases(records);
    let mut out = BTreeMap::new();
    for (key, c) in cons {
        let inc = increases
            .get(&(key.model_type.clone(), key.mode))
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        out.insert(
            key,
            RobustnessComponents {
                iqr_clean: c.iqr_mse,
                mean_abs_increase: mean(inc).unwrap_or(0.0),
                iqr_abs_increase: iqr(inc).unwrap_or(0.0),
            },
        );
    }
    Ok(out)
}

/// Robustness of local models: the clean-MSE IQR across seeds and nothing
/// else, since a local model sees no exogenous input to perturb.
pub fn local_robustness(records: &[EvalRecord]) -> Result<BTreeMap<ModelKey, f64>> {
    if let Some(r) = records.iter().find(|r| r.mode != Mode::Local) {
        return Err(Error::ModeMismatch(format!(
            "`{}` is a {} record",
            r.model_type,
            r.mode.label()
        )));
    }
    Ok(consistency(records)?
        .into_iter()
        .map(|(k, c)| (k, c.iqr_mse))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIndices {
    pub model_type: String,
    pub mode: Mode,
    pub median_mse: f64,
    pub iqr_mse: f64,
    pub median_mse_peak: Option<f64>,
    pub inference_seconds: Option<f64>,
    pub size_bytes: Option<f64>,
    pub cci: Option<f64>,
    pub mean_abs_increase: Option<f64>,
    pub iqr_abs_increase: Option<f64>,
    /// Global models only.
    pub ri: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffIndices {
    pub models: Vec<ModelIndices>,
}

/// Assemble every index. `complexity` maps a model to its measured
/// (inference seconds, size); CCI is normalised over the models that have
/// one. RI is computed over global models only.
pub fn tradeoff_indices(
    records: &[EvalRecord],
    complexity: &BTreeMap<ModelKey, (f64, f64)>,
) -> Result<TradeoffIndices> {
    let cons = consistency(records)?;

    let measured: Vec<(&ModelKey, (f64, f64))> = cons
        .keys()
        .filter_map(|k| complexity.get(k).map(|m| (k, *m)))
        .collect();
    let cci_values = if measured.is_empty() {
        Vec::new()
    } else {
        cci(&measured.iter().map(|(_, m)| *m).collect::<Vec<_>>())?
    };
    let cci_of: BTreeMap<&ModelKey, f64> =
        measured.iter().map(|(k, _)| *k).zip(cci_values).collect();

    let global: Vec<EvalRecord> = records
        .iter()
        .filter(|r| r.mode == Mode::Global)
        .cloned()
        .collect();
    let mut ri_of = BTreeMap::new();
    let mut comps_of = BTreeMap::new();
    if !global.is_empty() {
        let comps = robustness_components(&global)?;
        let values = ri(&comps.values().copied().collect::<Vec<_>>())?;
        for ((k, c), v) in comps.into_iter().zip(values) {
            ri_of.insert(k.clone(), v);
            comps_of.insert(k, c);
        }
    }

    let mut peaks: BTreeMap<ModelKey, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_clean()) {
        if let Some(p) = r.mse_peak {
            peaks
                .entry(ModelKey::new(&r.model_type, r.mode))
                .or_default()
                .push(p);
        }
    }

    let models = cons
        .iter()
        .map(|(k, c)| {
            let comps = comps_of.get(k);
            ModelIndices {
                model_type: k.model_type.clone(),
                mode: k.mode,
                median_mse: c.median_mse,
                iqr_mse: c.iqr_mse,
                median_mse_peak: peaks.get(k).and_then(|p| median(p)),
                inference_seconds: complexity.get(k).map(|m| m.0),
                size_bytes: complexity.get(k).map(|m| m.1),
                cci: cci_of.get(k).copied(),
                mean_abs_increase: comps.map(|c| c.mean_abs_increase),
                iqr_abs_increase: comps.map(|c| c.iqr_abs_increase),
                ri: ri_of.get(k).copied(),
            }
        })
        .collect();
    Ok(TradeoffIndices { models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::sweep::RECORD_SCHEMA_VERSION;

    fn clean(model: &str, mode: Mode, seed: u64, mse: f64) -> EvalRecord {
        EvalRecord {
            v: RECORD_SCHEMA_VERSION,
            model_type: model.into(),
            mode,
            seed,
            feature: None,
            error_kind: None,
            error_rate: 0.0,
            mse: Some(mse),
            mse_peak: Some(2.0 * mse),
            effective_rate: 0.0,
            failure: None,
            config_hash: None,
        }
    }

    fn perturbed(model: &str, seed: u64, mse: f64) -> EvalRecord {
        EvalRecord {
            feature: Some("level".into()),
            error_kind: Some("missing".into()),
            error_rate: 0.1,
            effective_rate: 0.1,
            ..clean(model, Mode::Global, seed, mse)
        }
    }

    #[test]
    fn consistency_iqr_of_four() {
        let recs: Vec<_> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, m)| clean("a", Mode::Global, i as u64, *m))
            .collect();
        let c = consistency(&recs).unwrap();
        let a = c[&ModelKey::new("a", Mode::Global)];
        assert_eq!(a.iqr_mse, 1.5);
        assert_eq!(a.median_mse, 2.5);
        assert!(matches!(
            consistency(&recs[..1]),
            Err(Error::InsufficientTrials(_))
        ));
    }

    #[test]
    fn cci_closed_forms() {
        assert_eq!(cci(&[(0.3, 10.0)]).unwrap(), vec![1.0]);
        assert_eq!(cci(&[(2.0, 8.0), (1.0, 4.0)]).unwrap(), vec![1.0, 0.5]);
        assert!(matches!(
            cci(&[(0.0, 1.0)]),
            Err(Error::InvalidMeasurement(_))
        ));
    }

    #[test]
    fn ri_zero_column_and_extremes() {
        let comps = [
            RobustnessComponents {
                iqr_clean: 2.0,
                mean_abs_increase: 0.0,
                iqr_abs_increase: 4.0,
            },
            RobustnessComponents {
                iqr_clean: 1.0,
                mean_abs_increase: 0.0,
                iqr_abs_increase: 1.0,
            },
            RobustnessComponents {
                iqr_clean: 0.0,
                mean_abs_increase: 0.0,
                iqr_abs_increase: 0.0,
            },
        ];
        let r = ri(&comps).unwrap();
        assert_eq!(r, vec![2.0 / 3.0, (0.5 + 0.25) / 3.0, 0.0]);
    }

    #[test]
    fn local_rejects_global_records() {
        let recs = vec![
            clean("a", Mode::Local, 0, 1.0),
            clean("a", Mode::Global, 1, 1.0),
        ];
        assert!(matches!(
            local_robustness(&recs),
            Err(Error::ModeMismatch(_))
        ));
        let local = vec![
            clean("a", Mode::Local, 0, 1.0),
            clean("a", Mode::Local, 1, 3.0),
        ];
        let got = local_robustness(&local).unwrap();
        assert_eq!(
            got[&ModelKey::new("a", Mode::Local)],
            consistency(&local).unwrap()[&ModelKey::new("a", Mode::Local)].iqr_mse
        );
    }

    #[test]
    fn components_from_records() {
        let recs = vec![
            clean("a", Mode::Global, 0, 1.0),
            clean("a", Mode::Global, 1, 2.0),
            perturbed("a", 0, 1.5),
            perturbed("a", 1, 1.0),
        ];
        let c = robustness_components(&recs).unwrap()[&ModelKey::new("a", Mode::Global)];
        assert_eq!(c.mean_abs_increase, 0.75);
        let t = tradeoff_indices(&recs, &BTreeMap::new()).unwrap();
        assert_eq!(t.models.len(), 1);
        assert_eq!(t.models[0].ri, Some(1.0));
        assert_eq!(t.models[0].cci, None);
    }
}
