#![allow(dead_code)]

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sewerbench::{ChannelSpec, Role, TimeSeriesFrame};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Target `y` plus two past covariates and one future covariate.
pub fn frame_from(y: Vec<f64>, seed: u64) -> TimeSeriesFrame {
    let n = y.len();
    let mut r = rng(seed);
    let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).cos() + r.random::<f64>()).collect();
    let f: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 2.0).collect();
    TimeSeriesFrame::new(
        t0(),
        1,
        vec![
            ChannelSpec::new("y", Role::Target),
            ChannelSpec::new("a", Role::PastCovariate),
            ChannelSpec::new("b", Role::PastCovariate),
            ChannelSpec::new("f", Role::FutureCovariate),
        ],
        vec![y, a, b, f],
    )
    .unwrap()
}

/// Random-walk target with noise, length `n`.
pub fn random_frame(n: usize, seed: u64) -> TimeSeriesFrame {
    let mut r = rng(seed ^ 0x9e37_79b9);
    let mut x = 10.0;
    let y = (0..n)
        .map(|i| {
            x = 0.95 * x + 0.5 + (r.random::<f64>() - 0.5) * 2.0;
            x + 3.0 * (i as f64 / 24.0 * std::f64::consts::TAU).sin()
        })
        .collect();
    frame_from(y, seed)
}

/// Single-channel frame.
pub fn series(values: Vec<f64>) -> TimeSeriesFrame {
    TimeSeriesFrame::new(t0(), 1, vec![ChannelSpec::new("x", Role::Target)], vec![values])
        .unwrap()
}

/// Order statistic by sorting a copy, with the same linear rule written out
/// independently: position `p (n - 1)` between neighbours.
pub fn oracle_quantile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (v.len() as f64 - 1.0);
    let below = pos.floor();
    let i = below as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] * (1.0 - (pos - below)) + v[i + 1] * (pos - below)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Maximal runs of a sorted index set, computed by scanning gaps.
pub fn oracle_runs(indices: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < indices.len() {
        let mut j = i;
        while j + 1 < indices.len() && indices[j + 1] == indices[j] + 1 {
            j += 1;
        }
        out.push((indices[i], j - i + 1));
        i = j + 1;
    }
    out
}
