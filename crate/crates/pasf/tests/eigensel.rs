//! Eigen selection correctness: per-bin decompositions (including the
//! low-rank Gram path), the pooled-eigenvalue threshold rule, shrinkage, and
//! conjugate mirroring.

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use pasf::eigensel::{decompose_stack, gap_threshold, mirror, shrink, EigenAtlas};
use pasf::numerics::{eigh, Complex64};
use pasf::spectral::{daniell_kernel, demean, estimate_spectral_density, Field};
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_field(grid_h: usize, grid_w: usize, n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid_h * grid_w * n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    Field::new(grid_h, grid_w, n, values).unwrap()
}

#[test]
fn decisive_gap_splits_at_geometric_mean() {
    let th = gap_threshold(&[100.0, 99.0, 1.0, 0.9]).unwrap();
    assert!(th.by_gap);
    assert!(!th.degenerate);
    assert_abs_diff_eq!(th.delta, (99.0f64 * 1.0).sqrt(), epsilon = 1e-12);
}

#[test]
fn single_eigenvalue_selects_itself() {
    let th = gap_threshold(&[5.0]).unwrap();
    assert!(th.by_gap);
    assert_abs_diff_eq!(th.delta, 5.0, epsilon = 0.0);
}

#[test]
fn gap_search_is_restricted_to_the_top_half() {
    // The only big ratio (7 → 1) sits outside the first-half window, so the
    // rule falls back to 99% coverage, keeping everything.
    let th = gap_threshold(&[10.0, 9.0, 8.0, 7.0, 1.0]).unwrap();
    assert!(!th.by_gap);
    assert_abs_diff_eq!(th.delta, 1.0, epsilon = 1e-12);
}

#[test]
fn continuum_spectrum_falls_back_to_coverage() {
    // Geometric decay with ratio 1.25 < 2 everywhere: no decisive gap.
    let pooled: Vec<f64> = (0..40).map(|i| 100.0 * 0.8f64.powi(i)).collect();
    let th = gap_threshold(&pooled).unwrap();
    assert!(!th.by_gap);
    assert!(!th.degenerate);
    // Δ equals the smallest retained eigenvalue of the 99%-mass prefix.
    let total: f64 = pooled.iter().sum();
    let mut acc = 0.0;
    let mut expected = *pooled.last().unwrap();
    for &v in &pooled {
        acc += v;
        if acc >= 0.99 * total {
            expected = v;
            break;
        }
    }
    assert_abs_diff_eq!(th.delta, expected, epsilon = 1e-12);
    let retained = pooled.iter().filter(|&&v| v >= th.delta).count();
    assert!(retained < pooled.len());
}

#[test]
fn all_zero_spectrum_is_degenerate() {
    let th = gap_threshold(&[0.0, 0.0, 0.0]).unwrap();
    assert!(th.degenerate);
    assert_abs_diff_eq!(th.delta, 0.0, epsilon = 0.0);
    assert!(gap_threshold(&[]).is_err());
}

#[test]
fn zero_threshold_retains_all_and_huge_threshold_none() {
    let field = random_field(2, 2, 32, 3);
    let stack = estimate_spectral_density(&demean(&field), &daniell_kernel(2)).unwrap();
    let per_freq = decompose_stack(&stack, 3).unwrap();
    let total: usize = per_freq.iter().map(|p| p.len()).sum();
    let atlas = shrink(&per_freq, 0.0, 3, 32, 4).unwrap();
    assert_eq!(atlas.entries.len(), total);
    // Every retained value clears the threshold.
    let max = atlas.entries.iter().map(|e| e.value).fold(0.0f64, f64::max);
    match shrink(&per_freq, max * 2.0, 3, 32, 4) {
        Err(pasf::PasfError::EmptyAtlas(_)) => {}
        other => panic!("expected empty-atlas error, got {other:?}"),
    }
}

#[test]
fn shrink_is_monotone_in_the_threshold() {
    let field = random_field(2, 3, 48, 8);
    let stack = estimate_spectral_density(&demean(&field), &daniell_kernel(3)).unwrap();
    let per_freq = decompose_stack(&stack, 4).unwrap();
    let mut counts = Vec::new();
    for delta in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8] {
        let count = match shrink(&per_freq, delta, 4, 48, 6) {
            Ok(atlas) => atlas.entries.len(),
            Err(_) => 0,
        };
        counts.push(count);
    }
    for w in counts.windows(2) {
        assert!(w[0] >= w[1], "retained counts must fall as Δ rises: {counts:?}");
    }
}

#[test]
fn gram_path_matches_direct_eigendecomposition() {
    // m = 9 locations but bandwidth 3: the stack is rank-3, and the Gram-side
    // decomposition must agree with a direct dense one.
    let field = random_field(3, 3, 64, 21);
    let centered = demean(&field);
    let stack = estimate_spectral_density(&centered, &daniell_kernel(1)).unwrap();
    assert!(stack.m > stack.kernel.bandwidth());
    let per_freq = decompose_stack(&stack, 5).unwrap();
    assert_eq!(per_freq.len(), 31);
    for (idx, pairs) in per_freq.iter().enumerate() {
        let j = idx + 1;
        // Rank-limited: at most bandwidth eigenpairs survive.
        assert!(pairs.len() <= 3, "bin {j} returned {} pairs", pairs.len());
        let direct = eigh(&stack.matrix(j)).unwrap();
        for (k, p) in pairs.iter().enumerate() {
            assert!(
                (p.value - direct[k].value).abs() <= 1e-9 * direct[0].value.max(1.0),
                "bin {j} rank {k}: {} vs {}",
                p.value,
                direct[k].value
            );
            // Both sides are gauge-fixed, so vectors agree componentwise.
            for (a, b) in p.vector.iter().zip(direct[k].vector.iter()) {
                assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-7);
                assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-7);
            }
        }
    }
}

#[test]
fn eigenvalues_are_sorted_and_vectors_unit_norm() {
    let field = random_field(2, 2, 40, 14);
    let stack = estimate_spectral_density(&demean(&field), &daniell_kernel(4)).unwrap();
    let per_freq = decompose_stack(&stack, 4).unwrap();
    for pairs in &per_freq {
        for w in pairs.windows(2) {
            assert!(w[0].value >= w[1].value);
        }
        for p in pairs {
            assert_abs_diff_eq!(p.vector.norm(), 1.0, epsilon = 1e-10);
        }
    }
    assert!(decompose_stack(&stack, 0).is_err());
    assert!(decompose_stack(&stack, 5).is_err());
}

#[test]
fn mirroring_reflects_bins_and_conjugates_vectors() {
    let v = DVector::from_vec(vec![
        Complex64::new(0.8, 0.0),
        Complex64::new(0.0, 0.6),
    ]);
    let atlas = EigenAtlas {
        entries: vec![pasf::eigensel::EigenEntry {
            freq_index: 3,
            rank: 1,
            value: 2.0,
            vector: v.clone(),
        }],
        r: 1,
        delta: 0.5,
        n: 10,
        m: 2,
    };
    let support = mirror(&atlas, &[1]).unwrap();
    assert_eq!(support.k, 1);
    assert_eq!(support.entries.len(), 2);
    let bins: Vec<usize> = support.entries.iter().map(|e| e.bin).collect();
    assert_eq!(bins, vec![3, 7]);
    for e in &support.entries {
        assert_eq!(e.label, 1);
        assert_eq!(e.channel, 0);
    }
    let mirrored = &support.entries[1].vector;
    assert_abs_diff_eq!(mirrored[0].re, 0.8, epsilon = 0.0);
    assert_abs_diff_eq!(mirrored[1].im, -0.6, epsilon = 0.0);
}

#[test]
fn mirroring_empty_atlas_gives_empty_support() {
    let atlas = EigenAtlas { entries: vec![], r: 3, delta: 1.0, n: 16, m: 4 };
    let support = mirror(&atlas, &[]).unwrap();
    assert_eq!(support.k, 0);
    assert!(support.entries.is_empty());
}

#[test]
fn mirroring_fixes_real_vectors() {
    let v = DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(-0.8, 0.0)]);
    let atlas = EigenAtlas {
        entries: vec![pasf::eigensel::EigenEntry { freq_index: 2, rank: 1, value: 1.0, vector: v.clone() }],
        r: 1,
        delta: 0.0,
        n: 8,
        m: 2,
    };
    let support = mirror(&atlas, &[1]).unwrap();
    for (a, b) in support.entries[0].vector.iter().zip(support.entries[1].vector.iter()) {
        assert_eq!(a, b);
    }
}

#[test]
fn colocated_entries_get_distinct_channels() {
    // Two retained ranks at the same bin and label occupy channels 0 and 1.
    let e = |rank: usize| pasf::eigensel::EigenEntry {
        freq_index: 4,
        rank,
        value: 1.0,
        vector: DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]),
    };
    let atlas = EigenAtlas { entries: vec![e(1), e(2)], r: 2, delta: 0.0, n: 12, m: 2 };
    let support = mirror(&atlas, &[1, 1]).unwrap();
    let mut channels: Vec<usize> =
        support.entries.iter().filter(|e| e.bin == 4).map(|e| e.channel).collect();
    channels.sort();
    assert_eq!(channels, vec![0, 1]);
    // Mirrored twins reuse their source channel.
    let mirrored: Vec<usize> =
        support.entries.iter().filter(|e| e.bin == 8).map(|e| e.channel).collect();
    assert_eq!(channels, { let mut m = mirrored.clone(); m.sort(); m });
}

proptest! {
    #[test]
    fn threshold_lies_within_the_positive_range(
        values in proptest::collection::vec(1e-6f64..1e6, 1..60)
    ) {
        let th = gap_threshold(&values).unwrap();
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(th.delta > 0.0);
        prop_assert!(th.delta <= max + 1e-9);
        // Never empties the selection: the max always clears Δ.
        prop_assert!(values.iter().any(|&v| v >= th.delta));
    }

    #[test]
    fn retained_count_shrinks_as_delta_grows(
        values in proptest::collection::vec(0.0f64..1e3, 2..40),
        cut in 0.0f64..1.0
    ) {
        let sorted = {
            let mut v = values.clone();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v
        };
        let lo = sorted.len() / 2;
        let d1 = sorted[lo] * cut;
        let d2 = sorted[lo];
        let c1 = values.iter().filter(|&&v| v >= d1).count();
        let c2 = values.iter().filter(|&&v| v >= d2).count();
        prop_assert!(c1 >= c2);
    }
}
