//! Complex-arithmetic kernels shared by every stage: the discrete Fourier
//! transform, Hermitian eigendecomposition, eigenvector gauge fixing, and the
//! error function used for exact Gaussian block integrals.

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;

use crate::error::{PasfError, Result};

pub type Complex64 = num_complex::Complex<f64>;

/// Transform direction for [`dft`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// X_j = Σ_t x_t e^{−2πi jt/n} (unnormalized).
    Forward,
    /// x_t = (1/n) Σ_j X_j e^{+2πi jt/n}; inverse ∘ forward = identity.
    Inverse,
}

/// Discrete Fourier transform of a complex series, any length n ≥ 1.
pub fn dft(x: &[Complex64], direction: Direction) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(PasfError::invalid("dft: empty input"));
    }
    let mut buf = x.to_vec();
    let mut planner = FftPlanner::new();
    match direction {
        Direction::Forward => planner.plan_fft_forward(buf.len()).process(&mut buf),
        Direction::Inverse => {
            planner.plan_fft_inverse(buf.len()).process(&mut buf);
            let scale = 1.0 / buf.len() as f64;
            for v in &mut buf {
                *v *= scale;
            }
        }
    }
    Ok(buf)
}

/// Forward DFT of each location's time series.
///
/// `values` is m×n row-major (location-major); the result keeps that layout
/// with bin index j in place of t. One plan is reused across all rows.
pub fn dft_rows(values: &[f64], m: usize, n: usize) -> Vec<Complex64> {
    assert_eq!(values.len(), m * n, "dft_rows: dimension mismatch");
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for s in 0..m {
        let row = &mut out[s * n..(s + 1) * n];
        for t in 0..n {
            row[t] = Complex64::new(values[s * n + t], 0.0);
        }
        fft.process(row);
    }
    out
}

/// Inverse DFT of each row of an m×n complex spectrum, returning the real
/// parts and the largest absolute imaginary residual (conjugate-symmetric
/// inputs leave residuals at rounding level).
pub fn idft_rows_real(spectra: &[Complex64], m: usize, n: usize) -> (Vec<f64>, f64) {
    assert_eq!(spectra.len(), m * n, "idft_rows_real: dimension mismatch");
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    let mut out = vec![0.0; m * n];
    let mut worst_imag = 0.0f64;
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..m {
        row.copy_from_slice(&spectra[s * n..(s + 1) * n]);
        fft.process(&mut row);
        for t in 0..n {
            let v = row[t] * scale;
            out[s * n + t] = v.re;
            worst_imag = worst_imag.max(v.im.abs());
        }
    }
    (out, worst_imag)
}

/// One eigenvalue/eigenvector pair of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    /// Unit-norm, gauge-fixed (see [`gauge_fix`]).
    pub vector: DVector<Complex64>,
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// The input is symmetrized defensively (H ← (H + H*)/2) because smoothed
/// periodograms accumulate rounding asymmetry. Every eigenvector is
/// gauge-fixed; exactly tied eigenvalues are ordered by ascending gauge
/// anchor index so the output is deterministic.
pub fn eigh(h: &DMatrix<Complex64>) -> Result<Vec<EigenPair>> {
    if h.nrows() != h.ncols() {
        return Err(PasfError::invalid(format!(
            "eigh: matrix is {}×{}, expected square",
            h.nrows(),
            h.ncols()
        )));
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let decomp = sym.symmetric_eigen();
    let mut pairs: Vec<EigenPair> = decomp
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &value)| EigenPair {
            value,
            vector: gauge_fix(&decomp.eigenvectors.column(i).into_owned()),
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap()
            .then_with(|| gauge_anchor(&a.vector).cmp(&gauge_anchor(&b.vector)))
    });
    Ok(pairs)
}

/// Index of the largest-modulus component (lowest index on ties) — the
/// component pinned real-positive by [`gauge_fix`].
pub fn gauge_anchor(v: &DVector<Complex64>) -> usize {
    let mut best = 0usize;
    let mut best_norm = f64::NEG_INFINITY;
    for (i, c) in v.iter().enumerate() {
        let n = c.norm_sqr();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    best
}

/// Remove the unit-scalar ambiguity of a complex vector: rotate so the
/// largest-modulus component (lowest index on ties) is real and positive.
/// Idempotent, and gauge_fix(c·v) = gauge_fix(v) for any unit complex c.
pub fn gauge_fix(v: &DVector<Complex64>) -> DVector<Complex64> {
    let anchor = v[gauge_anchor(v)];
    let norm = anchor.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let phase = anchor / norm;
    v.map(|c| c / phase)
}

/// Gauss error function; |error| < 1e-12 over the real line, exactly odd.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}
