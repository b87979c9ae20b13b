//! Scoring, peak events, the robustness sweep and the trade-off indices.

mod indices;
mod metrics;
mod peaks;
mod sweep;

pub use indices::{
    cci, consistency, local_robustness, ri, robustness_components, tradeoff_indices, Consistency,
    ModelIndices, ModelKey, RobustnessComponents, TradeoffIndices,
};
pub use metrics::{mse, mse_masked};
pub use peaks::{peak_mask, peak_mask_with, smoothed_differences, PeakMask, PeakOptions};
pub use sweep::{
    absolute_increases, cell_seed, perturbable_features, read_records_jsonl, robustness_sweep,
    write_records_jsonl, EvalRecord, SweepConfig, TrialSet, RECORD_SCHEMA_VERSION,
};
