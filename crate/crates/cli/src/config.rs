//! Run configuration (TOML).
//!
//! ```toml
//! n_seeds = 10
//! models = ["persistence", "linear_direct", "linear_recursive"]
//! modes = ["global", "local"]
//!
//! [dataset.synth]
//! length = 8760
//! seed = 7
//!
//! [split]
//! train_fraction = 0.6
//! val_fraction = 0.2
//!
//! [errors]
//! rates = [0.1, 0.2, 0.3, 0.4, 0.5]
//!
//! [[errors.kinds]]
//! kind = "outlier"
//! alpha = 1.1
//! beta = 0.1
//! ```

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sewerbench::errgen::{ErrorKind, DEFAULT_CLUSTER_MEAN_LEN};
use sewerbench::evaluate::PeakOptions;
use sewerbench::forecast::{Family, ForecastTask, Mode, ModelConfig};
use sewerbench::plugin::PluginEndpoint;
use sewerbench::preprocess::ChronoSplit;
use sewerbench::synth::SynthConfig;
use sewerbench::{Error, Result, TimeSeriesFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub seed_base: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub task: ForecastTask,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub plugins: Vec<PluginConfig>,
    #[serde(default)]
    pub errors: ErrorGrid,
    #[serde(default)]
    pub peaks: PeakOptions,
    /// Timed predictions per model for the complexity index.
    #[serde(default = "default_repeats")]
    pub complexity_repeats: usize,
    /// Fill gaps by linear interpolation (with indicator channels) before
    /// windowing.
    #[serde(default = "yes")]
    pub interpolate: bool,
}

fn default_seeds() -> usize {
    10
}
fn default_models() -> Vec<String> {
    [
        "persistence",
        "seasonal_naive",
        "linear_direct",
        "linear_recursive",
    ]
    .map(String::from)
    .to_vec()
}
fn default_modes() -> Vec<Mode> {
    vec![Mode::Global]
}
fn default_repeats() -> usize {
    5
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub csv: Option<PathBuf>,
    /// Role sidecar; defaults to `<csv stem>.schema.toml` next to the CSV.
    pub schema: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train_end: Option<DateTime<Utc>>,
    pub val_end: Option<DateTime<Utc>>,
    /// Used when no explicit boundaries are given.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.6
}
fn default_val_fraction() -> f64 {
    0.2
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_end: None,
            val_end: None,
            train_fraction: default_train_fraction(),
            val_fraction: default_val_fraction(),
        }
    }
}

impl SplitConfig {
    pub fn resolve(&self, frame: &TimeSeriesFrame) -> Result<ChronoSplit> {
        match (self.train_end, self.val_end) {
            (Some(train_end), Some(val_end)) => Ok(ChronoSplit { train_end, val_end }),
            (None, None) => ChronoSplit::from_fractions(
                frame,
                self.train_fraction,
                self.train_fraction + self.val_fraction,
            ),
            _ => Err(Error::InvalidArgument(
                "give both split.train_end and split.val_end, or neither".into(),
            )),
        }
    }
}

/// An external forecaster. `{seed}` in `argv` is replaced by the trial
/// seed, so one entry can stand for several independently trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginConfig {
    pub name: String,
    pub argv: Vec<String>,
    #[serde(default = "global")]
    pub mode: Mode,
}

fn global() -> Mode {
    Mode::Global
}

impl PluginConfig {
    pub fn endpoint(&self, seed: u64, base: &Path) -> PluginEndpoint {
        let mut argv: Vec<String> = self
            .argv
            .iter()
            .map(|a| a.replace("{seed}", &seed.to_string()))
            .collect();
        // relative program paths are relative to the config file
        if let Some(first) = argv.first_mut() {
            if first.starts_with("./") || first.starts_with("../") {
                *first = base.join(&*first).to_string_lossy().into_owned();
            }
        }
        PluginEndpoint::new(argv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FenceSource {
    /// Statistics of the test window being perturbed.
    Test,
    /// Statistics of the training segment.
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorGrid {
    #[serde(default = "default_rates")]
    pub rates: Vec<f64>,
    #[serde(default = "ErrorKind::default_grid")]
    pub kinds: Vec<ErrorKind>,
    #[serde(default = "default_cluster")]
    pub cluster_mean_len: f64,
    /// Channels to perturb; every non-indicator channel when absent.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default = "default_fences")]
    pub fences: FenceSource,
}

fn default_rates() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.4, 0.5]
}
fn default_cluster() -> f64 {
    DEFAULT_CLUSTER_MEAN_LEN
}
fn default_fences() -> FenceSource {
    FenceSource::Test
}

impl Default for ErrorGrid {
    fn default() -> Self {
        Self {
            rates: default_rates(),
            kinds: ErrorKind::default_grid(),
            cluster_mean_len: default_cluster(),
            features: None,
            fences: default_fences(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [self.dataset.csv.is_some(), self.dataset.synth.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(Error::InvalidArgument(
                "dataset needs exactly one of `csv` or `synth`".into(),
            ));
        }
        if let Some(s) = &self.dataset.synth {
            s.validate()?;
        }
        if self.n_seeds < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_seeds = {}; consistency needs at least 2",
                self.n_seeds
            )));
        }
        if self.models.is_empty() && self.plugins.is_empty() {
            return Err(Error::InvalidArgument("no models configured".into()));
        }
        for m in &self.models {
            let family: Family = m.parse()?;
            if family == Family::ExternalPlugin {
                return Err(Error::InvalidArgument(
                    "external models go under [[plugins]]".into(),
                ));
            }
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidArgument("no modes configured".into()));
        }
        for r in &self.errors.rates {
            if !(*r > 0.0 && *r <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "error rate {r} outside (0, 1]"
                )));
            }
        }
        for kind in &self.errors.kinds {
            sewerbench::errgen::ErrorSpec::new(*kind, 0.0, 0)
                .with_cluster_mean_len(self.errors.cluster_mean_len)
                .validate()?;
        }
        self.task.validate()?;
        self.model.train.validate()?;
        if self.complexity_repeats < 5 {
            return Err(Error::InvalidArgument(
                "complexity_repeats must be at least 5".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON rendering, hex encoded. Formatting and
    /// key order in the TOML file do not affect it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(canonical))
    }

    pub fn families(&self) -> Vec<Family> {
        self.models
            .iter()
            .map(|m| m.parse().expect("validated"))
            .collect()
    }

    /// Trial seeds `seed_base, seed_base + 1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64)
            .map(|k| self.seed_base + k)
            .collect()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
