//! The nested robustness loop: model type, trial, feature, error kind, rate.
//!
//! Every trained trial is first scored on clean test inputs. Then one
//! feature of the test inputs at a time is corrupted and the trial is scored
//! again. Ground truth always comes from the clean frame, so perturbing the
//! target channel only touches the history the model sees. Models are never
//! retrained on corrupted data.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mse, mse_masked};
use super::peaks::{peak_mask_with, PeakMask, PeakOptions};
use crate::errgen::{perturb_with_reference, ErrorKind, ErrorSpec, DEFAULT_CLUSTER_MEAN_LEN};
use crate::error::{Error, Result};
use crate::forecast::{
    build_windows, build_windows_with_truth, predict, ForecastTask, ForecasterHandle, Mode,
    WindowSet,
};
use crate::frame::{Role, TimeSeriesFrame};
use crate::rng;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// One cell of the sweep. Clean records have no feature, kind or rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub v: u32,
    pub model_type: String,
    pub mode: Mode,
    pub seed: u64,
    pub feature: Option<String>,
    pub error_kind: Option<String>,
    pub error_rate: f64,
    pub mse: Option<f64>,
    pub mse_peak: Option<f64>,
    pub effective_rate: f64,
    /// Why the cell could not be scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Hash of the run configuration that produced the record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl EvalRecord {
    pub fn is_clean(&self) -> bool {
        self.feature.is_none()
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none() && self.mse.is_some()
    }
}

/// All trials of one model type.
#[derive(Debug, Clone)]
pub struct TrialSet {
    pub model_type: String,
    pub mode: Mode,
    /// One handle per seed; `handle.seed` identifies the trial.
    pub trials: Vec<ForecasterHandle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub features: Vec<String>,
    pub kinds: Vec<ErrorKind>,
    pub rates: Vec<f64>,
    pub seed_base: u64,
    pub cluster_mean_len: f64,
    pub peaks: PeakOptions,
}

impl SweepConfig {
    /// Default error grid over the given features.
    pub fn new(features: Vec<String>) -> Self {
        Self {
            features,
            kinds: ErrorKind::default_grid(),
            rates: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            seed_base: 0,
            cluster_mean_len: DEFAULT_CLUSTER_MEAN_LEN,
            peaks: PeakOptions::default(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.features.len() * self.kinds.len() * self.rates.len()
    }
}

/// Every channel that can be perturbed: data channels, target included.
pub fn perturbable_features(frame: &TimeSeriesFrame) -> Vec<String> {
    frame
        .channels()
        .iter()
        .filter(|c| c.role != Role::ImputationIndicator)
        .map(|c| c.name.clone())
        .collect()
}

/// Perturbation seed of one cell. It depends on the trial seed and the
/// error coordinates but not on the model type, so every model type is
/// scored against the same corrupted inputs.
pub fn cell_seed(
    seed_base: u64,
    trial_seed: u64,
    feature: &str,
    kind: &ErrorKind,
    rate: f64,
) -> u64 {
    rng::derive_u64(
        seed_base,
        &[
            &trial_seed.to_string(),
            feature,
            kind.label(),
            &format!("{:016x}", rate.to_bits()),
        ],
    )
}

/// Run the sweep. `reference`, when given, supplies the series the fences
/// and clip bounds are computed from; otherwise the test window is used.
pub fn robustness_sweep(
    models: &[TrialSet],
    test: &TimeSeriesFrame,
    task: &ForecastTask,
    cfg: &SweepConfig,
    reference: Option<&TimeSeriesFrame>,
) -> Result<Vec<EvalRecord>> {
    let target = test.target_name()?.to_string();
    for f in &cfg.features {
        let idx = test.require(f)?;
        let spec = &test.channels()[idx];
        if spec.role == Role::ImputationIndicator && spec.source.as_deref() == Some(target.as_str())
        {
            return Err(Error::InvalidArgument(format!(
                "`{f}` is the target's imputation indicator"
            )));
        }
        if let Some(r) = reference {
            r.require(f)?;
        }
    }
    for &rate in &cfg.rates {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "error rate {rate} outside [0, 1]"
            )));
        }
    }
    let mask = peak_mask_with(test.column(test.target_index()?), &cfg.peaks)?;

    let mut clean_windows: HashMap<Mode, WindowSet> = HashMap::new();
    for set in models {
        if let std::collections::hash_map::Entry::Vacant(e) = clean_windows.entry(set.mode) {
            e.insert(build_windows(test, &task.with_mode(set.mode))?);
        }
    }

    struct Cell<'a> {
        set: &'a TrialSet,
        handle: &'a ForecasterHandle,
        error: Option<(&'a String, &'a ErrorKind, f64)>,
    }
    let mut cells = Vec::new();
    for set in models {
        for handle in &set.trials {
            cells.push(Cell {
                set,
                handle,
                error: None,
            });
            for feature in &cfg.features {
                for kind in &cfg.kinds {
                    for &rate in &cfg.rates {
                        cells.push(Cell {
                            set,
                            handle,
                            error: Some((feature, kind, rate)),
                        });
                    }
                }
            }
        }
    }

    let records = cells
        .par_iter()
        .map(|cell| {
            let mut record = EvalRecord {
                v: RECORD_SCHEMA_VERSION,
                model_type: cell.set.model_type.clone(),
                mode: cell.set.mode,
                seed: cell.handle.seed,
                feature: cell.error.map(|e| e.0.clone()),
                error_kind: cell.error.map(|e| e.1.label().to_string()),
                error_rate: cell.error.map_or(0.0, |e| e.2),
                mse: None,
                mse_peak: None,
                effective_rate: 0.0,
                failure: None,
                config_hash: None,
            };
            let task = task.with_mode(cell.set.mode);
            let outcome = match cell.error {
                None => score(cell.handle, &clean_windows[&cell.set.mode], &mask).map(|s| (s, 0.0)),
                Some((feature, kind, rate)) => {
                    let spec = ErrorSpec {
                        kind: *kind,
                        rate,
                        cluster_mean_len: cfg.cluster_mean_len,
                        seed: cell_seed(cfg.seed_base, cell.handle.seed, feature, kind, rate),
                    };
                    perturbed_score(cell.handle, test, reference, feature, &spec, &task, &mask)
                }
            };
            match outcome {
                Ok(((m, p), effective)) => {
                    record.mse = Some(m);
                    record.mse_peak = Some(p);
                    record.effective_rate = effective;
                }
                Err(e) => record.failure = Some(e.to_string()),
            }
            record
        })
        .collect();
    Ok(records)
}

fn score(handle: &ForecasterHandle, windows: &WindowSet, mask: &PeakMask) -> Result<(f64, f64)> {
    let pred = predict(handle, windows)?;
    Ok((
        mse(&pred, &windows.targets)?,
        mse_masked(&pred, &windows.targets, &windows.origins, mask)?,
    ))
}

fn perturbed_score(
    handle: &ForecasterHandle,
    test: &TimeSeriesFrame,
    reference: Option<&TimeSeriesFrame>,
    feature: &str,
    spec: &ErrorSpec,
    task: &ForecastTask,
    mask: &PeakMask,
) -> Result<((f64, f64), f64)> {
    let source = reference.unwrap_or(test);
    let (corrupted, err_mask) =
        perturb_with_reference(test, feature, spec, source.column(source.require(feature)?))?;
    let windows = build_windows_with_truth(&corrupted, test, task)?;
    Ok((score(handle, &windows, mask)?, err_mask.effective_rate()))
}

pub fn write_records_jsonl<W: Write>(records: &[EvalRecord], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_records_jsonl<R: BufRead>(reader: R) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: EvalRecord = serde_json::from_str(&line)?;
        if r.v != RECORD_SCHEMA_VERSION {
            return Err(Error::Parse(format!("record schema version {}", r.v)));
        }
        out.push(r);
    }
    Ok(out)
}

/// Absolute MSE increase of every scored perturbation cell against its
/// trial's clean record, keyed by (model type, mode).
pub fn absolute_increases(records: &[EvalRecord]) -> HashMap<(String, Mode), Vec<f64>> {
    let clean: HashMap<(&str, Mode, u64), f64> = records
        .iter()
        .filter(|r| r.is_clean())
        .filter_map(|r| Some(((r.model_type.as_str(), r.mode, r.seed), r.mse?)))
        .collect();
    let mut out: HashMap<(String, Mode), Vec<f64>> = HashMap::new();
    for r in records.iter().filter(|r| !r.is_clean() && r.is_ok()) {
        if let (Some(m), Some(base)) = (r.mse, clean.get(&(r.model_type.as_str(), r.mode, r.seed)))
        {
            out.entry((r.model_type.clone(), r.mode))
                .or_default()
                .push((m - base).abs());
        }
    }
    out
}
