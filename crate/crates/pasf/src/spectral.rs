//! Spectral density estimation: demeaning, the Daniell smoothing kernel, the
//! smoothed-periodogram stack, and cross-spectral quadratic forms.

use nalgebra::{DMatrix, DVector};

use crate::error::{PasfError, Result};
use crate::numerics::{dft_rows, Complex64};

/// A real-valued field on a regular grid over time.
///
/// Locations are vectorized row-major: s = row·grid_w + col, s = 0..m−1.
/// Values are stored location-major, so `values[s·n + t]` is location s at
/// time t.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid_h: usize,
    pub grid_w: usize,
    pub n: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid_h: usize, grid_w: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if grid_h == 0 || grid_w == 0 {
            return Err(PasfError::invalid("field: empty grid"));
        }
        if n == 0 {
            return Err(PasfError::invalid("field: zero time length"));
        }
        if values.len() != grid_h * grid_w * n {
            return Err(PasfError::invalid(format!(
                "field: {}×{} grid with n={} needs {} values, got {}",
                grid_h,
                grid_w,
                n,
                grid_h * grid_w * n,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(PasfError::invalid(format!("field: non-finite value {bad}")));
        }
        Ok(Field { grid_h, grid_w, n, values })
    }

    pub fn zeros(grid_h: usize, grid_w: usize, n: usize) -> Self {
        Field { grid_h, grid_w, n, values: vec![0.0; grid_h * grid_w * n] }
    }

    /// Number of spatial locations m = grid_h·grid_w.
    pub fn m(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn get(&self, row: usize, col: usize, t: usize) -> f64 {
        self.values[(row * self.grid_w + col) * self.n + t]
    }

    /// Time series of one vectorized location.
    pub fn location(&self, s: usize) -> &[f64] {
        &self.values[s * self.n..(s + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Snapshot at time t in grid layout (row-major, length m).
    pub fn frame(&self, t: usize) -> Vec<f64> {
        (0..self.m()).map(|s| self.values[s * self.n + t]).collect()
    }

    /// Σ_{s,t} value², the pooled energy used for variance shares.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Sample variance pooled over locations and time (mean removed).
    pub fn pooled_variance(&self) -> f64 {
        let len = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / len;
        self.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len
    }
}

/// Symmetric positive smoothing weights h_k, k = −q..q, Σ h_k = 1.
#[derive(Clone, Debug)]
pub struct SmoothingKernel {
    pub q: usize,
    /// Length 2q+1; index k+q holds h_k.
    pub weights: Vec<f64>,
}

impl SmoothingKernel {
    pub fn bandwidth(&self) -> usize {
        2 * self.q + 1
    }
}

/// Uniform (Daniell) kernel of half-width q: 2q+1 weights of 1/(2q+1).
pub fn daniell_kernel(q: usize) -> SmoothingKernel {
    let bw = 2 * q + 1;
    SmoothingKernel { q, weights: vec![1.0 / bw as f64; bw] }
}

/// Remove each location's temporal mean.
pub fn demean(field: &Field) -> Field {
    let mut out = field.clone();
    let n = field.n;
    for s in 0..field.m() {
        let row = &mut out.values[s * n..(s + 1) * n];
        let mean = row.iter().sum::<f64>() / n as f64;
        for v in row {
            *v -= mean;
        }
    }
    out
}

/// Smoothed-periodogram spectral density estimates f̂(ω_j) at every Fourier
/// frequency ω_j = j/n.
///
/// The stack is stored implicitly: the per-location forward DFT d (m×n) plus
/// the kernel. With column c_k(j) = √(h_k/n)·d(·, (j+k) mod n) and
/// C_j = [c_{−q}(j) … c_q(j)],  f̂(ω_j) = C_j C_j* — the smoothed periodogram
/// Σ_k h_k·(1/n)·d d* exactly. Per-bin matrices materialize on demand, and
/// eigen-related work can run on the (2q+1)² Gram C_j*C_j instead of the m²
/// matrix.
#[derive(Clone, Debug)]
pub struct SpectralStack {
    pub m: usize,
    pub n: usize,
    pub kernel: SmoothingKernel,
    /// Forward DFT per location, m×n location-major.
    dft: Vec<Complex64>,
}

impl SpectralStack {
    /// m×(2q+1) scaled DFT columns C_j with f̂(ω_j) = C_j C_j*.
    pub fn scaled_columns(&self, j: usize) -> DMatrix<Complex64> {
        assert!(j < self.n, "frequency index out of range");
        let bw = self.kernel.bandwidth();
        let q = self.kernel.q as isize;
        let n = self.n as isize;
        let mut c = DMatrix::zeros(self.m, bw);
        for (col, k) in (-q..=q).enumerate() {
            let jj = (j as isize + k).rem_euclid(n) as usize;
            let scale = (self.kernel.weights[col] / self.n as f64).sqrt();
            for s in 0..self.m {
                c[(s, col)] = self.dft[s * self.n + jj] * scale;
            }
        }
        c
    }

    /// Materialize f̂(ω_j) as an m×m Hermitian matrix.
    pub fn matrix(&self, j: usize) -> DMatrix<Complex64> {
        let c = self.scaled_columns(j);
        &c * c.adjoint()
    }

    /// f̂(ω_j)·x without materializing the matrix.
    pub fn apply(&self, j: usize, x: &DVector<Complex64>) -> DVector<Complex64> {
        let c = self.scaled_columns(j);
        &c * (c.adjoint() * x)
    }

    /// trace f̂(ω_j) = Σ_k h_k·‖d(·, j+k)‖²/n.
    pub fn trace(&self, j: usize) -> f64 {
        let q = self.kernel.q as isize;
        let n = self.n as isize;
        let mut acc = 0.0;
        for (col, k) in (-q..=q).enumerate() {
            let jj = (j as isize + k).rem_euclid(n) as usize;
            let mut e = 0.0;
            for s in 0..self.m {
                e += self.dft[s * self.n + jj].norm_sqr();
            }
            acc += self.kernel.weights[col] * e / self.n as f64;
        }
        acc
    }

    /// Raw-periodogram trace at bin j: ‖d(·,j)‖²/n.
    pub fn periodogram_trace(&self, j: usize) -> f64 {
        let mut e = 0.0;
        for s in 0..self.m {
            e += self.dft[s * self.n + j].norm_sqr();
        }
        e / self.n as f64
    }

    /// Per-location forward DFT values at bin j (length m).
    pub fn dft_bin(&self, j: usize) -> DVector<Complex64> {
        DVector::from_fn(self.m, |s, _| self.dft[s * self.n + j])
    }

    /// The full per-location forward DFT, m×n location-major.
    pub fn dft_values(&self) -> &[Complex64] {
        &self.dft
    }

    /// Frequency indices carrying phase information: j = 1..⌈n/2⌉−1.
    /// DC is excluded (demeaned data), and so is Nyquist for even n (its
    /// eigenvectors are real, so phases degenerate to {0, π}).
    pub fn half_indices(&self) -> std::ops::Range<usize> {
        1..self.n.div_ceil(2)
    }
}

/// Estimate the spectral stack of a demeaned field by kernel-smoothing the
/// raw periodogram P(ω_j) = (1/n)·d(ω_j)d(ω_j)* circularly across bins.
pub fn estimate_spectral_density(field: &Field, kernel: &SmoothingKernel) -> Result<SpectralStack> {
    if kernel.bandwidth() > field.n {
        return Err(PasfError::invalid(format!(
            "smoothing bandwidth {} exceeds series length {}",
            kernel.bandwidth(),
            field.n
        )));
    }
    let m = field.m();
    let dft = dft_rows(field.values(), m, field.n);
    Ok(SpectralStack { m, n: field.n, kernel: kernel.clone(), dft })
}

/// conj(u)ᵀ f̂(ω_j) v — the cross-spectral quadratic form behind coherence
/// checks.
pub fn cross_quadform(
    stack: &SpectralStack,
    j: usize,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
) -> Result<Complex64> {
    if j >= stack.n {
        return Err(PasfError::invalid(format!(
            "cross_quadform: bin {} out of range (n={})",
            j, stack.n
        )));
    }
    if u.len() != stack.m || v.len() != stack.m {
        return Err(PasfError::invalid("cross_quadform: vector length != m"));
    }
    Ok(u.dotc(&stack.apply(j, v)))
}
