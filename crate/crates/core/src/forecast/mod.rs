//! Forecasters: windowing, baseline families, training and serialization.
//!
//! The built-in families cover both structural styles that matter for the
//! robustness protocol: one-step models rolled forward recursively
//! (`linear_recursive`) and direct multi-horizon maps (`linear_direct`,
//! `mlp_direct`). Heavier architectures attach as external plugins.

pub mod adam;
mod complexity;
mod handle;
pub mod mlp;
pub mod ridge;
mod search;
mod windows;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use complexity::{measure_complexity, Complexity};
pub use handle::{fit, predict, ForecasterHandle, Model, MODEL_FORMAT_VERSION};
pub use mlp::{TrainConfig, TrainHistory};
pub use search::{random_search, SearchGrid, SearchOutcome};
pub use windows::{build_windows, build_windows_with_truth, ForecastTask, Layout, Mode, WindowSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Persistence,
    SeasonalNaive,
    LinearDirect,
    LinearRecursive,
    MlpDirect,
    ExternalPlugin,
}

impl Family {
    pub const BUILT_IN: [Family; 5] = [
        Family::Persistence,
        Family::SeasonalNaive,
        Family::LinearDirect,
        Family::LinearRecursive,
        Family::MlpDirect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Persistence => "persistence",
            Family::SeasonalNaive => "seasonal_naive",
            Family::LinearDirect => "linear_direct",
            Family::LinearRecursive => "linear_recursive",
            Family::MlpDirect => "mlp_direct",
            Family::ExternalPlugin => "external_plugin",
        }
    }

    /// Whether training involves random initialization.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Family::MlpDirect)
    }

    fn tag(self) -> u8 {
        match self {
            Family::Persistence => 0,
            Family::SeasonalNaive => 1,
            Family::LinearDirect => 2,
            Family::LinearRecursive => 3,
            Family::MlpDirect => 4,
            Family::ExternalPlugin => 5,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        [
            Family::Persistence,
            Family::SeasonalNaive,
            Family::LinearDirect,
            Family::LinearRecursive,
            Family::MlpDirect,
            Family::ExternalPlugin,
        ]
        .into_iter()
        .find(|f| f.tag() == tag)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        [
            Family::Persistence,
            Family::SeasonalNaive,
            Family::LinearDirect,
            Family::LinearRecursive,
            Family::MlpDirect,
            Family::ExternalPlugin,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown model family `{s}`")))
    }
}

/// Hyperparameters of the built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_season")]
    pub season: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_lambda() -> f64 {
    1e-3
}
fn default_hidden() -> usize {
    64
}
fn default_season() -> usize {
    24
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            ridge_lambda: default_lambda(),
            hidden: default_hidden(),
            season: default_season(),
            train: TrainConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self
    }
}
