//! Plain PCA of the vectorized field — the comparison baseline. Components
//! are eigenvectors of the time-averaged spatial covariance; no frequency
//! structure, no phase alignment.

use nalgebra::DMatrix;

use crate::error::{PasfError, Result};
use crate::spectral::Field;

/// Orthonormal loadings, their score series, and variance shares.
#[derive(Clone, Debug)]
pub struct PcaModel {
    /// loadings[i] has length m, mutually orthonormal.
    pub loadings: Vec<Vec<f64>>,
    /// scores[i][t] = loadings[i]ᵀ · z_t.
    pub scores: Vec<Vec<f64>>,
    /// Eigenvalue share of the covariance trace, per component.
    pub shares: Vec<f64>,
}

/// Top-k PCA of a demeaned field: eigendecompose the sample covariance
/// (1/n)·Z Zᵀ, project for scores, and reconstruct each component as
/// loading·scoreᵀ. Shares are λ_i/trace, so Σ shares ≤ 1 with equality at
/// k = m.
pub fn pca_decompose(field: &Field, k: usize) -> Result<(PcaModel, Vec<Field>)> {
    let m = field.m();
    let n = field.n;
    if k == 0 || k > m.min(n) {
        return Err(PasfError::invalid(format!(
            "pca_decompose: k={k} out of range 1..min(m={m}, n={n})"
        )));
    }
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for t in 0..n {
        for a in 0..m {
            let za = field.values()[a * n + t];
            for b in a..m {
                cov[(a, b)] += za * field.values()[b * n + t];
            }
        }
    }
    let scale = 1.0 / n as f64;
    for a in 0..m {
        for b in a..m {
            let v = cov[(a, b)] * scale;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let trace: f64 = (0..m).map(|i| cov[(i, i)]).sum();
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut loadings = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    let mut shares = Vec::with_capacity(k);
    let mut fields = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut u: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        // Deterministic sign: largest-magnitude entry positive.
        let anchor = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if u[anchor] < 0.0 {
            for v in &mut u {
                *v = -*v;
            }
        }
        let score: Vec<f64> = (0..n)
            .map(|t| (0..m).map(|s| u[s] * field.values()[s * n + t]).sum())
            .collect();
        let mut comp = vec![0.0; m * n];
        for s in 0..m {
            for t in 0..n {
                comp[s * n + t] = u[s] * score[t];
            }
        }
        fields.push(Field::new(field.grid_h, field.grid_w, n, comp)?);
        shares.push(if trace > 0.0 { (eig.eigenvalues[idx] / trace).max(0.0) } else { 0.0 });
        loadings.push(u);
        scores.push(score);
    }
    Ok((PcaModel { loadings, scores, shares }, fields))
}
