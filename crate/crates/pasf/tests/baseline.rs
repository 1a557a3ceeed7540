//! PCA baseline: exact rank-1 recovery, orthonormality, score/loading
//! identities, share accounting, and monotone reconstruction error.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use pasf::baseline::pca_decompose;
use pasf::spectral::{demean, Field};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_field(grid_h: usize, grid_w: usize, n: usize, seed: u64) -> Field {
    let m = grid_h * grid_w;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..m * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    demean(&Field::new(grid_h, grid_w, n, values).unwrap())
}

#[test]
fn rank_one_data_is_recovered_exactly() {
    let (h, w, n) = (3usize, 3usize, 40usize);
    let m = h * w;
    let u: Vec<f64> = (0..m).map(|s| ((s + 1) as f64).sin()).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: Vec<f64> = u.iter().map(|v| v / norm).collect();
    let a: Vec<f64> = (0..n).map(|t| (0.37 * t as f64).cos() * 3.0).collect();
    let mut values = vec![0.0; m * n];
    for s in 0..m {
        for t in 0..n {
            values[s * n + t] = u[s] * a[t];
        }
    }
    let field = Field::new(h, w, n, values).unwrap();
    let (model, comps) = pca_decompose(&field, 1).unwrap();
    assert_eq!(comps.len(), 1);
    for (got, want) in comps[0].values().iter().zip(field.values()) {
        assert_abs_diff_eq!(*got, *want, epsilon = 1e-10);
    }
    assert_relative_eq!(model.shares[0], 1.0, max_relative = 1e-10);
    // Loading matches u up to the sign convention (largest entry positive).
    let anchor = u
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let sign = if u[anchor] < 0.0 { -1.0 } else { 1.0 };
    for (got, want) in model.loadings[0].iter().zip(&u) {
        assert_abs_diff_eq!(*got, sign * *want, epsilon = 1e-10);
    }
}

#[test]
fn loadings_are_orthonormal_and_scores_are_projections() {
    let field = random_field(4, 5, 64, 7);
    let m = 20;
    let n = 64;
    let k = 6;
    let (model, _) = pca_decompose(&field, k).unwrap();
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = model.loadings[i].iter().zip(&model.loadings[j]).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(dot, want, epsilon = 1e-10);
        }
    }
    for i in 0..k {
        for t in 0..n {
            let proj: f64 = (0..m).map(|s| model.loadings[i][s] * field.values()[s * n + t]).sum();
            assert_abs_diff_eq!(model.scores[i][t], proj, epsilon = 1e-12);
        }
    }
}

#[test]
fn white_noise_top_share_is_near_the_isotropic_level() {
    let field = random_field(5, 5, 4000, 11);
    let (model, _) = pca_decompose(&field, 1).unwrap();
    let iso = 1.0 / 25.0;
    assert!(
        (model.shares[0] - iso).abs() / iso < 0.5,
        "top share {} vs isotropic level {iso}",
        model.shares[0]
    );
}

#[test]
fn full_decomposition_shares_sum_to_one() {
    let field = random_field(3, 4, 50, 3);
    let (model, comps) = pca_decompose(&field, 12).unwrap();
    let total: f64 = model.shares.iter().sum();
    assert_relative_eq!(total, 1.0, max_relative = 1e-8);
    // And the component fields sum back to the data.
    let n = 50;
    for s in 0..12 {
        for t in 0..n {
            let sum: f64 = comps.iter().map(|c| c.values()[s * n + t]).sum();
            assert_abs_diff_eq!(sum, field.values()[s * n + t], epsilon = 1e-9);
        }
    }
}

#[test]
fn component_fields_are_time_pooled_orthogonal() {
    let field = random_field(4, 4, 200, 19);
    let (_, comps) = pca_decompose(&field, 5).unwrap();
    let scale: f64 = comps.iter().map(|c| c.energy()).sum::<f64>();
    for i in 0..comps.len() {
        for j in 0..i {
            let dot: f64 = comps[i].values().iter().zip(comps[j].values()).map(|(a, b)| a * b).sum();
            assert!(
                dot.abs() / scale < 1e-8,
                "components {i},{j} pooled inner product {dot:e}"
            );
        }
    }
}

#[test]
fn reconstruction_error_decreases_with_k() {
    let field = random_field(3, 3, 80, 23);
    let n = 80;
    let mut prev = f64::INFINITY;
    for k in 1..=9 {
        let (_, comps) = pca_decompose(&field, k).unwrap();
        let mut err = 0.0;
        for s in 0..9 {
            for t in 0..n {
                let sum: f64 = comps.iter().map(|c| c.values()[s * n + t]).sum();
                let d = field.values()[s * n + t] - sum;
                err += d * d;
            }
        }
        assert!(err <= prev + 1e-9, "k={k}: error {err} rose above {prev}");
        prev = err;
    }
}

#[test]
fn out_of_range_k_is_rejected() {
    let field = random_field(3, 3, 5, 1);
    assert!(pca_decompose(&field, 0).is_err());
    // min(m=9, n=5) = 5 is the cap.
    assert!(pca_decompose(&field, 5).is_ok());
    assert!(pca_decompose(&field, 6).is_err());
}
