//! Spectral estimation correctness: kernel normalization, demeaning, the
//! periodogram convention, circular smoothing, energy bookkeeping, Hermitian
//! symmetry, and agreement with closed-form autoregressive spectra.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use nalgebra::DVector;
use pasf::numerics::{dft, Complex64, Direction};
use pasf::simkit::{ar2_simulate, ar2_spectrum};
use pasf::spectral::{
    cross_quadform, daniell_kernel, demean, estimate_spectral_density, Field,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_field(grid_h: usize, grid_w: usize, n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid_h * grid_w * n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    Field::new(grid_h, grid_w, n, values).unwrap()
}

#[test]
fn daniell_kernel_is_uniform_and_normalized() {
    for q in [0usize, 1, 4, 10] {
        let k = daniell_kernel(q);
        assert_eq!(k.weights.len(), 2 * q + 1);
        assert_eq!(k.bandwidth(), 2 * q + 1);
        let sum: f64 = k.weights.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        for w in &k.weights {
            assert_abs_diff_eq!(*w, 1.0 / (2 * q + 1) as f64, epsilon = 1e-15);
        }
    }
}

#[test]
fn demean_zeroes_every_location_mean() {
    let field = random_field(3, 4, 50, 1);
    let centered = demean(&field);
    for s in 0..field.m() {
        let mean: f64 = centered.location(s).iter().sum::<f64>() / 50.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-13);
    }
    // A constant-in-time field demeans to zero everywhere.
    let constant = Field::new(2, 2, 5, vec![3.0; 20]).unwrap();
    assert_eq!(demean(&constant).energy(), 0.0);
}

#[test]
fn unsmoothed_stack_matches_periodogram_by_hand() {
    // With q = 0 the stack at bin j is (1/n)·d_j d_j*, d = forward DFT.
    let field = random_field(2, 2, 32, 9);
    let centered = demean(&field);
    let stack = estimate_spectral_density(&centered, &daniell_kernel(0)).unwrap();
    let n = 32usize;
    let mut dfts = Vec::new();
    for s in 0..4 {
        let x: Vec<Complex64> =
            centered.location(s).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        dfts.push(dft(&x, Direction::Forward).unwrap());
    }
    for j in [1usize, 5, 13] {
        let mat = stack.matrix(j);
        for a in 0..4 {
            for b in 0..4 {
                let expect = dfts[a][j] * dfts[b][j].conj() / n as f64;
                assert_abs_diff_eq!(mat[(a, b)].re, expect.re, epsilon = 1e-12);
                assert_abs_diff_eq!(mat[(a, b)].im, expect.im, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn smoothing_preserves_total_energy() {
    // Circular smoothing with unit-mass weights redistributes but never
    // creates periodogram mass: Σ_j trace f̂(ω_j) = Σ_j trace P(ω_j) = ‖x‖².
    let field = random_field(3, 3, 64, 4);
    let centered = demean(&field);
    let stack = estimate_spectral_density(&centered, &daniell_kernel(5)).unwrap();
    let smoothed: f64 = (0..64).map(|j| stack.trace(j)).sum();
    let raw: f64 = (0..64).map(|j| stack.periodogram_trace(j)).sum();
    let energy = centered.energy();
    assert_relative_eq!(smoothed, raw, max_relative = 1e-11);
    assert_relative_eq!(raw, energy, max_relative = 1e-11);
}

#[test]
fn stack_matrices_are_hermitian_and_mirror_conjugate() {
    let field = random_field(2, 3, 40, 12);
    let centered = demean(&field);
    let stack = estimate_spectral_density(&centered, &daniell_kernel(3)).unwrap();
    for j in [1usize, 7, 19] {
        let mat = stack.matrix(j);
        let mirrored = stack.matrix(40 - j);
        for a in 0..6 {
            for b in 0..6 {
                let h = mat[(a, b)] - mat[(b, a)].conj();
                assert_abs_diff_eq!(h.norm(), 0.0, epsilon = 1e-12);
                // Real input: f̂(ω_{n−j}) is the entrywise conjugate.
                let d = mirrored[(a, b)] - mat[(a, b)].conj();
                assert_abs_diff_eq!(d.norm(), 0.0, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn stack_apply_and_quadform_match_materialized_matrix() {
    let field = random_field(2, 2, 24, 33);
    let centered = demean(&field);
    let stack = estimate_spectral_density(&centered, &daniell_kernel(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = DVector::from_fn(4, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let v = DVector::from_fn(4, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    for j in [1usize, 6, 11] {
        let mat = stack.matrix(j);
        let direct = &mat * &v;
        let lazy = stack.apply(j, &v);
        assert_abs_diff_eq!((direct - lazy).norm(), 0.0, epsilon = 1e-12);
        let qf = cross_quadform(&stack, j, &u, &v).unwrap();
        let expect = u.dotc(&(&mat * &v));
        assert_abs_diff_eq!(qf.re, expect.re, epsilon = 1e-12);
        assert_abs_diff_eq!(qf.im, expect.im, epsilon = 1e-12);
    }
}

#[test]
fn half_indices_exclude_dc_and_nyquist() {
    let even = estimate_spectral_density(&demean(&random_field(1, 2, 16, 0)), &daniell_kernel(1)).unwrap();
    assert_eq!(even.half_indices().collect::<Vec<_>>(), (1..8).collect::<Vec<_>>());
    let odd = estimate_spectral_density(&demean(&random_field(1, 2, 17, 0)), &daniell_kernel(1)).unwrap();
    assert_eq!(odd.half_indices().collect::<Vec<_>>(), (1..9).collect::<Vec<_>>());
}

#[test]
fn bandwidth_wider_than_series_is_rejected() {
    let field = random_field(2, 2, 10, 5);
    assert!(estimate_spectral_density(&field, &daniell_kernel(5)).is_err());
    assert!(estimate_spectral_density(&field, &daniell_kernel(4)).is_ok());
}

#[test]
fn smoothed_spectrum_tracks_autoregressive_density() {
    // One AR(2) channel, long sample: the smoothed periodogram should sit
    // within sampling error of the closed-form spectral density.
    let n = 1 << 16;
    let beta = (0.9, -0.5);
    let sigma2 = 1.0;
    let x = ar2_simulate(beta, sigma2, n, 2000, 77).unwrap();
    let field = Field::new(1, 1, n, x).unwrap();
    let centered = demean(&field);
    // Bandwidth 257 → relative sd ≈ 1/√257 ≈ 6%.
    let stack = estimate_spectral_density(&centered, &daniell_kernel(128)).unwrap();
    let mut checked = 0;
    for j in [n / 16, n / 8, 3 * n / 16, n / 4, 3 * n / 8] {
        let omega = j as f64 / n as f64;
        let truth = ar2_spectrum(beta, sigma2, omega);
        let est = stack.trace(j);
        assert!(
            (est - truth).abs() / truth < 0.25,
            "bin {j}: estimate {est:.4} vs density {truth:.4}"
        );
        checked += 1;
    }
    assert_eq!(checked, 5);
}

#[test]
fn flat_spectrum_for_white_noise() {
    let n = 1 << 15;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sigma2: f64 = 2.0;
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.sample(rand_distr::StandardNormal);
            u * sigma2.sqrt()
        })
        .collect();
    let field = Field::new(1, 1, n, values).unwrap();
    let stack = estimate_spectral_density(&demean(&field), &daniell_kernel(64)).unwrap();
    let bins: Vec<usize> = (1..n / 2).step_by(n / 64).collect();
    let mut mean = 0.0;
    for &j in &bins {
        let est = stack.trace(j);
        assert!((est - sigma2).abs() / sigma2 < 0.5, "bin {j}: {est}");
        mean += est;
    }
    mean /= bins.len() as f64;
    assert!((mean - sigma2).abs() / sigma2 < 0.05, "mean level {mean}");
}

#[test]
fn field_validates_shape_and_finiteness() {
    assert!(Field::new(2, 2, 3, vec![0.0; 11]).is_err());
    assert!(Field::new(2, 2, 3, vec![f64::NAN; 12]).is_err());
    assert!(Field::new(0, 2, 3, vec![]).is_err());
    let f = Field::new(2, 2, 3, (0..12).map(|i| i as f64).collect()).unwrap();
    // values are location-major: location s = row·w + col holds samples s·n..s·n+n.
    assert_eq!(f.get(1, 0, 2), 8.0);
    assert_eq!(f.location(3), &[9.0, 10.0, 11.0]);
    assert_eq!(f.frame(1), vec![1.0, 4.0, 7.0, 10.0]);
}
