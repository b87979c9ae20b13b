//! Evaluation harness for sewer filling-level forecasters.
//!
//! The crate covers the full protocol: frame preprocessing, clustered
//! sensor-error injection, baseline forecasters, the nested robustness
//! sweep, peak-event scoring, multi-seed consistency and the complexity /
//! robustness trade-off indices. External models attach through a
//! line-delimited JSON subprocess protocol ([`plugin`]).

pub mod errgen;
pub mod error;
pub mod evaluate;
pub mod forecast;
pub mod frame;
pub mod io;
pub mod plugin;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use frame::{ChannelSpec, Role, TimeSeriesFrame};
