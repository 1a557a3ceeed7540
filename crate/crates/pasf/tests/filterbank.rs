//! Filter-bank correctness: the frequency-domain projection against a brute
//! force time-domain circular convolution with the built filter coefficients,
//! realness, energy bookkeeping, projection idempotence, and the coherence
//! check.

use approx::assert_abs_diff_eq;
use pasf::eigensel::{decompose_stack, mirror, shrink, MirroredSupport, SupportEntry};
use pasf::filterbank::{
    apply_decomposition, apply_time_domain, build_filters, pcs_coherence_check, variance_explained,
};
use pasf::spectral::{daniell_kernel, demean, estimate_spectral_density, Field, SpectralStack};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_field(grid_h: usize, grid_w: usize, n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid_h * grid_w * n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    Field::new(grid_h, grid_w, n, values).unwrap()
}

/// Build a labeled, mirrored support from a field by running the estimation
/// and selection stages with round-robin labels over `k` clusters.
fn support_for(field: &Field, q: usize, r: usize, k: usize) -> (Field, SpectralStack, MirroredSupport) {
    let centered = demean(field);
    let stack = estimate_spectral_density(&centered, &daniell_kernel(q)).unwrap();
    let per_freq = decompose_stack(&stack, r).unwrap();
    let atlas = shrink(&per_freq, 0.0, r, centered.n, centered.m()).unwrap();
    let labels: Vec<usize> = (0..atlas.entries.len()).map(|i| 1 + i % k).collect();
    let support = mirror(&atlas, &labels).unwrap();
    (centered, stack, support)
}

#[test]
fn frequency_projection_equals_time_domain_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for trial in 0..10 {
        let grid_w = rng.random_range(1..=5usize);
        let n = rng.random_range(8..=32usize);
        let q = rng.random_range(0..=2usize);
        let field = random_field(1, grid_w, n, 1000 + trial);
        let r = rng.random_range(1..=grid_w);
        let k = rng.random_range(1..=2usize);
        let (centered, _, support) = support_for(&field, q, r, k);

        let deco = apply_decomposition(&centered, &support).unwrap();
        let filters = build_filters(&support).unwrap();
        let time_domain = apply_time_domain(&centered, &filters).unwrap();

        assert_eq!(deco.components.len(), time_domain.len());
        let scale = centered.energy().sqrt();
        for (freq_comp, time_comp) in deco.components.iter().zip(&time_domain) {
            let mut worst = 0.0f64;
            for (a, b) in freq_comp.values().iter().zip(time_comp.values()) {
                worst = worst.max((a - b).abs());
            }
            assert!(
                worst / scale < 1e-8,
                "trial {trial}: projection and convolution differ by {worst:.3e} (scale {scale:.3e})"
            );
        }
    }
}

#[test]
fn components_and_residual_rebuild_the_input_exactly() {
    let field = random_field(2, 2, 24, 7);
    let (centered, _, support) = support_for(&field, 1, 2, 2);
    let deco = apply_decomposition(&centered, &support).unwrap();
    assert!(deco.worst_imag < 1e-10, "imaginary residue {}", deco.worst_imag);
    let m = centered.m();
    for s in 0..m {
        for t in 0..24 {
            let mut sum = deco.residual.values()[s * 24 + t];
            for comp in &deco.components {
                sum += comp.values()[s * 24 + t];
            }
            assert_abs_diff_eq!(sum, centered.values()[s * 24 + t], epsilon = 1e-10);
        }
    }
}

#[test]
fn orthogonal_supports_make_shares_additive() {
    // Component/residual energies split the total exactly (Parseval over
    // disjoint or orthogonal frequency supports).
    let field = random_field(2, 3, 40, 19);
    let (centered, _, support) = support_for(&field, 2, 3, 3);
    let deco = apply_decomposition(&centered, &support).unwrap();
    let total: f64 = deco.variance_shares.iter().sum::<f64>() + deco.residual_share;
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    for share in &deco.variance_shares {
        assert!(*share >= 0.0 && *share <= 1.0);
    }
    // variance_explained agrees with the reported shares.
    for (comp, share) in deco.components.iter().zip(&deco.variance_shares) {
        let ve = variance_explained(comp, &centered).unwrap();
        assert_abs_diff_eq!(ve, *share, epsilon = 1e-12);
    }
}

#[test]
fn projection_is_idempotent_per_cluster() {
    let field = random_field(1, 4, 32, 3);
    let (centered, _, support) = support_for(&field, 1, 2, 2);
    let deco = apply_decomposition(&centered, &support).unwrap();
    // Re-projecting a reconstructed component returns it unchanged: its own
    // cluster keeps everything, the other clusters get nothing.
    let again = apply_decomposition(&deco.components[0], &support).unwrap();
    let scale = deco.components[0].energy().sqrt().max(1e-12);
    for (a, b) in again.components[0].values().iter().zip(deco.components[0].values()) {
        assert!((a - b).abs() / scale < 1e-9, "projection must be idempotent");
    }
    for other in &again.components[1..] {
        assert!(other.energy().sqrt() / scale < 1e-9, "foreign cluster leaked energy");
    }
    assert!(again.residual.energy().sqrt() / scale < 1e-9);
}

#[test]
fn pcs_series_have_expected_shape() {
    let field = random_field(2, 2, 30, 11);
    let (centered, _, support) = support_for(&field, 1, 2, 2);
    let deco = apply_decomposition(&centered, &support).unwrap();
    assert_eq!(deco.pcs.len(), deco.components.len());
    for (k, pcs) in deco.pcs.iter().enumerate() {
        assert_eq!(pcs.label, k + 1);
        assert!(pcs.channels >= 1);
        assert_eq!(pcs.series.len(), pcs.channels);
        for ch in &pcs.series {
            assert_eq!(ch.len(), 30);
            assert!(ch.iter().all(|v| v.is_finite()));
        }
        // A live component has nonzero principal component series.
        let energy: f64 = pcs.series.iter().flatten().map(|v| v * v).sum();
        assert!(energy > 0.0);
    }
}

#[test]
fn coherence_check_passes_orthogonal_and_flags_shared_vectors() {
    let field = random_field(2, 2, 36, 23);
    let (_, stack, support) = support_for(&field, 2, 3, 3);
    let max = pcs_coherence_check(&support, &stack).unwrap();
    assert!(max < 1e-8, "eigenvector-based supports must be incoherent, got {max:.3e}");

    // Pathological support: the same top eigenvector under two labels at one
    // bin has coherence 1 and must be caught.
    let per_freq = decompose_stack(&stack, 1).unwrap();
    let v = per_freq[4][0].vector.clone();
    let value = per_freq[4][0].value;
    let bad = MirroredSupport {
        n: stack.n,
        m: stack.m,
        k: 2,
        entries: vec![
            SupportEntry { bin: 5, vector: v.clone(), value, label: 1, channel: 0 },
            SupportEntry { bin: 5, vector: v, value, label: 2, channel: 0 },
        ],
    };
    let flagged = pcs_coherence_check(&bad, &stack).unwrap();
    assert!(flagged > 0.99, "shared eigenvector must read as coherent, got {flagged}");
}

#[test]
fn filters_are_real_with_mirrored_support() {
    let field = random_field(1, 3, 20, 5);
    let (_, _, support) = support_for(&field, 1, 2, 2);
    let filters = build_filters(&support).unwrap();
    assert!(!filters.is_empty());
    for f in &filters {
        assert!(f.worst_imag < 1e-10, "filter imaginary residue {}", f.worst_imag);
        assert_eq!(f.c_coeffs.len(), f.channels);
        assert_eq!(f.b_coeffs.len(), f.channels);
        for ch in 0..f.channels {
            assert_eq!(f.c_coeffs[ch].len(), f.n * f.m);
            assert_eq!(f.b_coeffs[ch].len(), f.n * f.m);
        }
    }
}

#[test]
fn empty_cluster_labels_are_rejected() {
    // A support claiming k=2 but containing only label-1 entries cannot
    // produce a filter pair for cluster 2.
    let field = random_field(1, 2, 16, 2);
    let (centered, _, support) = support_for(&field, 1, 1, 1);
    let mut bad = support;
    bad.k = 2;
    assert!(build_filters(&bad).is_err());
    assert!(apply_decomposition(&centered, &bad).is_err());
}

#[test]
fn dimension_mismatches_are_rejected() {
    let field = random_field(2, 2, 16, 31);
    let (_, _, support) = support_for(&field, 1, 2, 2);
    let wrong = random_field(2, 2, 8, 32); // n differs from support
    assert!(apply_decomposition(&wrong, &support).is_err());
    let wrong_m = random_field(1, 3, 16, 33); // m differs
    assert!(apply_decomposition(&wrong_m, &support).is_err());
}

#[test]
fn single_tone_field_is_captured_by_its_bin_eigenvector() {
    // x_s(t) = a_s·cos(2π·5·t/n + φ_s) is rank one at bin 5; the projection
    // onto that bin's top eigenvector (plus mirror) rebuilds the whole field.
    let n = 40;
    let amps = [1.0, 0.7, -0.4, 1.3];
    let phases = [0.0, 1.1, -0.8, 2.3];
    let mut values = vec![0.0; 4 * n];
    for s in 0..4 {
        for t in 0..n {
            values[s * n + t] =
                amps[s] * (2.0 * std::f64::consts::PI * 5.0 * t as f64 / n as f64 + phases[s]).cos();
        }
    }
    let field = Field::new(2, 2, n, values).unwrap();
    let centered = demean(&field);
    let stack = estimate_spectral_density(&centered, &daniell_kernel(0)).unwrap();
    let per_freq = decompose_stack(&stack, 1).unwrap();
    let top = &per_freq[4][0]; // bin 5
    let support = MirroredSupport {
        n,
        m: 4,
        k: 1,
        entries: vec![
            SupportEntry { bin: 5, vector: top.vector.clone(), value: top.value, label: 1, channel: 0 },
            SupportEntry {
                bin: n - 5,
                vector: top.vector.map(|c| c.conj()),
                value: top.value,
                label: 1,
                channel: 0,
            },
        ],
    };
    let deco = apply_decomposition(&centered, &support).unwrap();
    assert!(deco.variance_shares[0] > 1.0 - 1e-10, "share {}", deco.variance_shares[0]);
    let scale = centered.energy().sqrt();
    for (a, b) in deco.components[0].values().iter().zip(centered.values()) {
        assert!((a - b).abs() / scale < 1e-9);
    }
}
