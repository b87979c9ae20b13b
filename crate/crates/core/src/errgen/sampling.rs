use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::rng;

/// Number of cells an error rate selects out of `n`.
pub fn target_count(n: usize, rate: f64) -> usize {
    ((rate * n as f64).round() as usize).min(n)
}

/// Clustered errors-at-random placement.
///
/// Returns exactly `round(rate * n)` sorted indices arranged in contiguous
/// runs. Run lengths are geometric with mean `cluster_mean_len` (the last
/// one is cut so the total is exact) and the runs are placed uniformly at
/// random without overlap. Runs may touch, in which case they merge.
///
/// Panics if `rate` is outside `[0, 1]` or `cluster_mean_len < 1`.
pub fn sample_clusters(n: usize, rate: f64, cluster_mean_len: f64, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, &["clusters"]);
    sample_clusters_with(n, rate, cluster_mean_len, &mut rng)
}

pub fn sample_clusters_with<R: Rng + ?Sized>(
    n: usize,
    rate: f64,
    cluster_mean_len: f64,
    rng: &mut R,
) -> Vec<usize> {
    assert!((0.0..=1.0).contains(&rate), "rate {rate} outside [0, 1]");
    assert!(cluster_mean_len >= 1.0, "cluster mean length must be >= 1");
    let k = target_count(n, rate);
    if k == 0 {
        return Vec::new();
    }
    if k == n {
        return (0..n).collect();
    }

    // failures-before-success + 1 has mean 1/p
    let lengths_law = Geometric::new(1.0 / cluster_mean_len).expect("p in (0, 1]");
    let mut lengths = Vec::new();
    let mut total = 0usize;
    while total < k {
        let len = (1 + lengths_law.sample(rng) as usize).min(k - total);
        lengths.push(len);
        total += len;
    }

    // Uniform arrangement of `runs` blocks among `free` cells: choose which of
    // the `free + runs` slots are blocks.
    let runs = lengths.len();
    let free = n - k;
    let mut slots = index::sample(rng, free + runs, runs).into_vec();
    slots.sort_unstable();

    let mut out = Vec::with_capacity(k);
    let mut covered = 0;
    for (j, (&slot, &len)) in slots.iter().zip(&lengths).enumerate() {
        let start = slot - j + covered;
        out.extend(start..start + len);
        covered += len;
    }
    out
}

/// Split a sorted index set into maximal runs of consecutive indices.
pub fn runs(indices: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &i in indices {
        match out.last_mut() {
            Some((start, len)) if *start + *len == i => *len += 1,
            _ => out.push((i, 1)),
        }
    }
    out
}
