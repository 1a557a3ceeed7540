//! Per-frequency eigendecomposition of the spectral stack, pooled-eigenvalue
//! threshold selection, and conjugate mirroring of the retained entries.

use nalgebra::DVector;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{PasfError, Result};
use crate::numerics::{eigh, Complex64, EigenPair};
use crate::spectral::SpectralStack;

pub use crate::numerics::gauge_fix;

/// One retained (frequency, rank) pair of the selection.
#[derive(Clone, Debug)]
pub struct EigenEntry {
    /// Fourier bin j, restricted to 1..⌈n/2⌉−1.
    pub freq_index: usize,
    /// 1-based rank within the bin (1 = largest eigenvalue).
    pub rank: usize,
    pub value: f64,
    /// Unit-norm, gauge-fixed.
    pub vector: DVector<Complex64>,
}

/// The shrinkage-selected entry set with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct EigenAtlas {
    pub entries: Vec<EigenEntry>,
    pub r: usize,
    pub delta: f64,
    pub n: usize,
    pub m: usize,
}

/// Top-r eigenpairs of f̂(ω_j) for every j = 1..⌈n/2⌉−1 (list index j−1).
///
/// Eigenvectors are gauge-fixed and each list is sorted descending. When
/// m > 2q+1 the decomposition runs on the (2q+1)² Gram matrix C*C of the
/// stack's scaled DFT columns — f̂ = CC* shares its nonzero eigenvalues with
/// C*C, and v = Cu/√μ lifts the eigenvectors — so cost stays O(bandwidth³)
/// per bin. Ranks beyond the rank of C (λ = 0 numerically) are omitted.
pub fn decompose_stack(stack: &SpectralStack, r: usize) -> Result<Vec<Vec<EigenPair>>> {
    if r == 0 {
        return Err(PasfError::invalid("decompose_stack: r must be ≥ 1"));
    }
    if r > stack.m {
        return Err(PasfError::invalid(format!(
            "decompose_stack: r={} exceeds spatial dimension m={}",
            r, stack.m
        )));
    }
    let bins: Vec<usize> = stack.half_indices().collect();
    #[cfg(feature = "parallel")]
    let bin_iter = bins.par_iter();
    #[cfg(not(feature = "parallel"))]
    let bin_iter = bins.iter();
    bin_iter
        .map(|&j| {
            if stack.m <= stack.kernel.bandwidth() {
                let pairs = eigh(&stack.matrix(j))?;
                Ok(pairs.into_iter().take(r).collect())
            } else {
                top_r_via_gram(stack, j, r)
            }
        })
        .collect()
}

fn top_r_via_gram(stack: &SpectralStack, j: usize, r: usize) -> Result<Vec<EigenPair>> {
    let c = stack.scaled_columns(j);
    let gram = c.adjoint() * &c;
    let pairs = eigh(&gram)?;
    let max_mu = pairs.first().map(|p| p.value.max(0.0)).unwrap_or(0.0);
    let mut out = Vec::with_capacity(r);
    for p in pairs.into_iter().take(r) {
        // Rank cutoff: zero eigenvalues of the Gram have no liftable vector.
        if p.value <= max_mu * 1e-14 || p.value <= 0.0 {
            break;
        }
        let lifted = &c * &p.vector;
        let norm = lifted.norm();
        if norm == 0.0 {
            break;
        }
        out.push(EigenPair { value: p.value, vector: gauge_fix(&lifted.unscale(norm)) });
    }
    Ok(out)
}

/// Result of the pooled-eigenvalue threshold search.
#[derive(Clone, Copy, Debug)]
pub struct Threshold {
    pub delta: f64,
    /// True when a decisive ratio gap fixed Δ; false when the energy-coverage
    /// fallback did, or on degenerate input.
    pub by_gap: bool,
    /// True only for the degenerate all-zero input (Δ = 0).
    pub degenerate: bool,
}

/// Ratio gaps below this are treated as continuum (no decisive gap).
const DECISIVE_RATIO: f64 = 2.0;
/// Fallback: retain the smallest prefix covering this share of pooled mass.
const FALLBACK_COVERAGE: f64 = 0.99;

/// Choose the shrinkage threshold Δ from the pooled top-r eigenvalues.
///
/// Sort descending and find i* maximizing λ_i/λ_{i+1} over the first half of
/// the list (i ≤ ⌈P/2⌉, skipping zero successors); Δ = √(λ_{i*}·λ_{i*+1}).
/// When no in-window ratio reaches 2 the landscape has no usable gap, and Δ
/// is instead set to the smallest eigenvalue of the shortest prefix holding
/// ≥ 99% of the pooled mass. A single value selects itself; all-zero input
/// yields Δ = 0, flagged degenerate.
pub fn gap_threshold(pooled: &[f64]) -> Result<Threshold> {
    if pooled.is_empty() {
        return Err(PasfError::invalid("gap_threshold: empty pooled eigenvalues"));
    }
    let mut sorted: Vec<f64> = pooled.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if sorted[0] <= 0.0 {
        return Ok(Threshold { delta: 0.0, by_gap: false, degenerate: true });
    }
    if sorted.len() == 1 {
        return Ok(Threshold { delta: sorted[0], by_gap: true, degenerate: false });
    }
    let window = sorted.len().div_ceil(2);
    let mut best: Option<(usize, f64)> = None;
    for i in 0..window.min(sorted.len() - 1) {
        if sorted[i + 1] <= 0.0 {
            continue;
        }
        let ratio = sorted[i] / sorted[i + 1];
        if best.map_or(true, |(_, r)| ratio > r) {
            best = Some((i, ratio));
        }
    }
    if let Some((i, ratio)) = best {
        if ratio >= DECISIVE_RATIO {
            return Ok(Threshold {
                delta: (sorted[i] * sorted[i + 1]).sqrt(),
                by_gap: true,
                degenerate: false,
            });
        }
    }
    let total: f64 = sorted.iter().sum();
    let mut acc = 0.0;
    for &v in sorted.iter() {
        acc += v;
        if acc >= FALLBACK_COVERAGE * total {
            return Ok(Threshold { delta: v, by_gap: false, degenerate: false });
        }
    }
    Ok(Threshold { delta: *sorted.last().unwrap(), by_gap: false, degenerate: false })
}

/// Retain exactly the pairs with λ ≥ Δ (within each bin's top-r list).
///
/// An empty result is an error — there is nothing to filter.
pub fn shrink(per_freq: &[Vec<EigenPair>], delta: f64, r: usize, n: usize, m: usize) -> Result<EigenAtlas> {
    if delta < 0.0 {
        return Err(PasfError::invalid("shrink: Δ must be ≥ 0"));
    }
    let mut entries = Vec::new();
    for (idx, pairs) in per_freq.iter().enumerate() {
        for (k, p) in pairs.iter().enumerate() {
            if p.value >= delta {
                entries.push(EigenEntry {
                    freq_index: idx + 1,
                    rank: k + 1,
                    value: p.value,
                    vector: p.vector.clone(),
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(PasfError::EmptyAtlas(format!(
            "threshold Δ={delta:.6e} retained no eigenvalue"
        )));
    }
    Ok(EigenAtlas { entries, r, delta, n, m })
}

/// One frequency-domain filter tap: an eigenvector assigned to a cluster at
/// one full-circle bin.
#[derive(Clone, Debug)]
pub struct SupportEntry {
    /// Full-circle bin index 0..n−1.
    pub bin: usize,
    pub vector: DVector<Complex64>,
    pub value: f64,
    /// Cluster id 1..K.
    pub label: usize,
    /// Channel slot within the cluster's filter (position among co-located
    /// vectors at the same bin, 0-based).
    pub channel: usize,
}

/// Atlas entries plus cluster labels, closed under conjugate mirroring.
#[derive(Clone, Debug)]
pub struct MirroredSupport {
    pub n: usize,
    pub m: usize,
    /// Number of clusters.
    pub k: usize,
    pub entries: Vec<SupportEntry>,
}

/// Mirror each labeled atlas entry at bin j to bin n−j with the conjugated
/// eigenvector and the same label, so downstream filters come out real.
pub fn mirror(atlas: &EigenAtlas, labels: &[usize]) -> Result<MirroredSupport> {
    if labels.len() != atlas.entries.len() {
        return Err(PasfError::invalid(format!(
            "mirror: {} labels for {} entries",
            labels.len(),
            atlas.entries.len()
        )));
    }
    let k = labels.iter().copied().max().unwrap_or(0);
    let mut entries = Vec::with_capacity(2 * atlas.entries.len());
    // Channel slots count co-located vectors per (label, bin) in entry order.
    let mut slot: std::collections::HashMap<(usize, usize), usize> = std::collections::HashMap::new();
    for (e, &label) in atlas.entries.iter().zip(labels) {
        let j = e.freq_index;
        let channel = *slot
            .entry((label, j))
            .and_modify(|c| *c += 1)
            .or_insert(0);
        entries.push(SupportEntry { bin: j, vector: e.vector.clone(), value: e.value, label, channel });
        entries.push(SupportEntry {
            bin: atlas.n - j,
            vector: e.vector.map(|c| c.conj()),
            value: e.value,
            label,
            channel,
        });
    }
    Ok(MirroredSupport { n: atlas.n, m: atlas.m, k, entries })
}
