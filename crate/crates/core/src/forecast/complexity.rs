use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::handle::{predict, ForecasterHandle};
use super::windows::WindowSet;
use crate::error::{Error, Result};
use crate::stats::median;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    /// Median wall-clock seconds for one prediction over the whole probe.
    pub inference_seconds: f64,
    pub size_bytes: usize,
    pub param_count: usize,
}

/// Time `repeats` full-probe predictions after one warm-up run.
///
/// Run this with the worker to yourself; concurrent load skews the timings.
pub fn measure_complexity(
    handle: &ForecasterHandle,
    probe: &WindowSet,
    repeats: usize,
) -> Result<Complexity> {
    if repeats < 5 {
        return Err(Error::InvalidArgument(format!(
            "{repeats} repeats, need at least 5"
        )));
    }
    predict(handle, probe)?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let out = predict(handle, probe)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    Ok(Complexity {
        inference_seconds: median(&times).expect("repeats >= 5"),
        size_bytes: handle.serialized_size(),
        param_count: handle.param_count(),
    })
}
