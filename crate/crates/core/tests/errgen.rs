mod common;

use proptest::prelude::*;

use sewerbench::errgen::{
    apply_clipping, apply_missing, fence_stats, perturb, runs, sample_clusters, ClipBounds,
    ErrorKind, ErrorSpec,
};
use sewerbench::stats::{quantile, FenceStats};

use common::{oracle_quantile, oracle_runs, random_frame, series};

#[test]
fn clip_zero_to_nine_against_order_statistics() {
    let values: Vec<f64> = (0..10).map(f64::from).collect();
    let frame = series(values.clone());
    let spec = ErrorSpec::new(
        ErrorKind::Clip {
            q_lower: 0.2,
            q_upper: 0.8,
        },
        1.0,
        3,
    );
    let (out, mask) = apply_clipping(&frame, "x", &spec).unwrap();
    let lo = oracle_quantile(&values, 0.2);
    let hi = oracle_quantile(&values, 0.8);
    assert_eq!((lo, hi), (1.8, 7.2));
    let x = out.channel("x").unwrap();
    for (i, v) in values.iter().enumerate() {
        let expected = v.clamp(lo, hi);
        assert!((x[i] - expected).abs() < 1e-12, "cell {i}: {} vs {expected}", x[i]);
    }
    assert_eq!(mask.effective_indices, vec![0, 1, 8, 9]);
    assert_eq!(mask.indices.len(), 10);
}

#[test]
fn constant_channel_is_never_clipped() {
    let frame = series(vec![4.0; 50]);
    let spec = ErrorSpec::new(
        ErrorKind::Clip {
            q_lower: 0.2,
            q_upper: 0.8,
        },
        0.6,
        1,
    );
    let (out, mask) = apply_clipping(&frame, "x", &spec).unwrap();
    assert!(out.bit_identical(&frame));
    assert_eq!(mask.effective_rate(), 0.0);
}

#[test]
fn missing_half_of_ten_in_runs() {
    let frame = series((0..10).map(f64::from).collect());
    let spec = ErrorSpec::new(ErrorKind::Missing, 0.5, 8);
    let (out, mask) = apply_missing(&frame, "x", &spec).unwrap();
    let x = out.channel("x").unwrap();
    assert_eq!(x.iter().filter(|v| v.is_nan()).count(), 5);
    let total: usize = oracle_runs(&mask.indices).iter().map(|r| r.1).sum();
    assert_eq!(total, 5);
    assert_eq!(runs(&mask.indices), oracle_runs(&mask.indices));
}

#[test]
fn fence_stats_match_sort_oracle() {
    for seed in 0..200 {
        let f = random_frame(50 + seed as usize * 3, seed);
        for ch in ["y", "a", "b"] {
            let v = f.channel(ch).unwrap();
            let s = fence_stats(&f, ch).unwrap();
            let q1 = oracle_quantile(v, 0.25);
            let q3 = oracle_quantile(v, 0.75);
            assert!((s.q1 - q1).abs() <= 1e-12 * (1.0 + q1.abs()));
            assert!((s.q3 - q3).abs() <= 1e-12 * (1.0 + q3.abs()));
            let iqr = q3 - q1;
            assert!((s.lower_fence - (q1 - 1.5 * iqr)).abs() <= 1e-12 * (1.0 + q1.abs()));
            assert!((s.upper_fence - (q3 + 1.5 * iqr)).abs() <= 1e-12 * (1.0 + q3.abs()));
        }
    }
}

fn kind_strategy() -> impl Strategy<Value = ErrorKind> {
    prop_oneof![
        (0.0f64..3.0, 0.0f64..0.5).prop_map(|(alpha, beta)| ErrorKind::Outlier { alpha, beta }),
        Just(ErrorKind::Missing),
        (0.0f64..0.5, 0.5f64..1.0).prop_map(|(q_lower, q_upper)| ErrorKind::Clip {
            q_lower,
            q_upper: q_upper.max(q_lower + 1e-3).min(1.0),
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn perturb_invariants(
        n in 20usize..800,
        rate in 0.0f64..=1.0,
        mean_len in 1.0f64..40.0,
        seed in any::<u64>(),
        kind in kind_strategy(),
        channel in prop::sample::select(vec!["y", "a", "b", "f"]),
    ) {
        let frame = random_frame(n, seed % 97);
        let spec = ErrorSpec::new(kind, rate, seed).with_cluster_mean_len(mean_len);
        let (out, mask) = perturb(&frame, channel, &spec).unwrap();

        // count and clustering
        prop_assert_eq!(mask.indices.len(), (rate * n as f64).round() as usize);
        prop_assert!(mask.indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(mask.indices.iter().all(|&i| i < n));
        prop_assert_eq!(runs(&mask.indices), oracle_runs(&mask.indices));

        // effective subset and rate
        prop_assert!(mask.effective_indices.iter().all(|i| mask.indices.binary_search(i).is_ok()));
        prop_assert!(mask.effective_rate() <= mask.requested_rate());

        // locality
        let idx = frame.index_of(channel).unwrap();
        for c in 0..frame.width() {
            let (a, b) = (frame.column(c), out.column(c));
            for t in 0..n {
                if c != idx || mask.indices.binary_search(&t).is_err() {
                    prop_assert_eq!(a[t].to_bits(), b[t].to_bits());
                }
            }
        }

        // kind-specific postconditions
        let before = frame.column(idx);
        let after = out.column(idx);
        match kind {
            ErrorKind::Missing => {
                prop_assert_eq!(&mask.effective_indices, &mask.indices);
                prop_assert!(mask.indices.iter().all(|&i| after[i].is_nan()));
            }
            ErrorKind::Clip { q_lower, q_upper } => {
                let b = ClipBounds::from_values(before, q_lower, q_upper).unwrap();
                prop_assert!((b.lower - oracle_quantile(before, q_lower)).abs() <= 1e-12 * (1.0 + b.lower.abs()));
                for &i in &mask.indices {
                    if mask.effective_indices.binary_search(&i).is_ok() {
                        prop_assert!(before[i] < b.lower || before[i] > b.upper);
                        prop_assert!(after[i] == b.lower || after[i] == b.upper);
                    } else {
                        prop_assert_eq!(after[i].to_bits(), before[i].to_bits());
                    }
                }
            }
            ErrorKind::Outlier { alpha, beta } => {
                prop_assert_eq!(&mask.effective_indices, &mask.indices);
                if beta == 0.0 && alpha >= 1.0 {
                    let s = FenceStats::from_values(before).unwrap();
                    prop_assert!(mask.indices.iter().all(|&i| s.is_outlier(after[i])));
                }
            }
        }

        // determinism
        let (again, mask2) = perturb(&frame, channel, &spec).unwrap();
        prop_assert!(again.bit_identical(&out));
        prop_assert_eq!(mask2, mask);
    }

    #[test]
    fn clusters_shorten_with_mean_length_one(n in 200usize..3000, seed in any::<u64>()) {
        let s = sample_clusters(n, 0.1, 1.0, seed);
        let r = runs(&s);
        // Geometric lengths with mean 1 are all 1; only touching runs merge.
        prop_assert!(r.len() * 10 >= s.len() * 7);
    }

    #[test]
    fn quantile_matches_oracle(values in prop::collection::vec(-1e6f64..1e6, 1..300), p in 0.0f64..=1.0) {
        let got = quantile(&values, p).unwrap();
        let want = oracle_quantile(&values, p);
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}
