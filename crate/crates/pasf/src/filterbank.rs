//! Paired filter construction from clustered eigenvector supports, and their
//! application: principal component series, reconstructed dynamic
//! components, residual, and variance shares.

use crate::eigensel::MirroredSupport;
use crate::error::{PasfError, Result};
use crate::numerics::{idft_rows_real, Complex64};
use crate::spectral::{Field, SpectralStack};

/// Time-domain coefficients of one cluster's paired filters.
///
/// For channel ch, `c_coeffs[ch][τ·m + s]` is the analysis row Ĉ_τ (field →
/// PCS channel) and `b_coeffs[ch][τ·m + s]` the synthesis column B̂_τ (PCS
/// channel → field). Both are inverse DFTs of the cluster's masked
/// eigenvector spectra; conjugate-mirrored support makes them real
/// (`worst_imag` records the largest imaginary residual dropped).
#[derive(Clone, Debug)]
pub struct FilterPair {
    pub label: usize,
    pub channels: usize,
    pub m: usize,
    pub n: usize,
    pub c_coeffs: Vec<Vec<f64>>,
    pub b_coeffs: Vec<Vec<f64>>,
    pub worst_imag: f64,
}

/// Build one [`FilterPair`] per cluster label from the mirrored support.
///
/// Channel ch of cluster k has frequency response C(ω_j) = conj(v)ᵀ at the
/// bins where the cluster holds an eigenvector in that channel slot, zero
/// elsewhere; coefficients are Ĉ_τ = (1/n) Σ_j C(ω_j) e^{2πiτj/n} and
/// B̂(ω) = conj(C(ω))ᵀ. Empty overall support yields no filters.
pub fn build_filters(support: &MirroredSupport) -> Result<Vec<FilterPair>> {
    let (m, n) = (support.m, support.n);
    let mut out = Vec::new();
    for label in 1..=support.k {
        let entries: Vec<_> = support.entries.iter().filter(|e| e.label == label).collect();
        if entries.is_empty() {
            return Err(PasfError::invalid(format!("build_filters: cluster {label} has no support")));
        }
        let channels = entries.iter().map(|e| e.channel + 1).max().unwrap();
        let mut c_coeffs = Vec::with_capacity(channels);
        let mut b_coeffs = Vec::with_capacity(channels);
        let mut worst_imag = 0.0f64;
        for ch in 0..channels {
            // Location-major spectra: buf[s·n + j].
            let mut c_spec = vec![Complex64::new(0.0, 0.0); m * n];
            let mut b_spec = vec![Complex64::new(0.0, 0.0); m * n];
            for e in entries.iter().filter(|e| e.channel == ch) {
                for s in 0..m {
                    c_spec[s * n + e.bin] += e.vector[s].conj();
                    b_spec[s * n + e.bin] += e.vector[s];
                }
            }
            let (c_tau, ci) = idft_rows_real(&c_spec, m, n);
            let (b_tau, bi) = idft_rows_real(&b_spec, m, n);
            worst_imag = worst_imag.max(ci).max(bi);
            // Re-index from location-major to τ-major: coeff[τ·m + s].
            let mut c_t = vec![0.0; m * n];
            let mut b_t = vec![0.0; m * n];
            for s in 0..m {
                for t in 0..n {
                    c_t[t * m + s] = c_tau[s * n + t];
                    b_t[t * m + s] = b_tau[s * n + t];
                }
            }
            c_coeffs.push(c_t);
            b_coeffs.push(b_t);
        }
        out.push(FilterPair { label, channels, m, n, c_coeffs, b_coeffs, worst_imag });
    }
    Ok(out)
}

/// One cluster's principal component series (real, one row per channel).
#[derive(Clone, Debug)]
pub struct Pcs {
    pub label: usize,
    pub channels: usize,
    /// series[ch][t].
    pub series: Vec<Vec<f64>>,
}

/// Output of [`apply_decomposition`]: per-cluster reconstructions, PCS,
/// residual, and variance shares. observed = Σ components + residual holds
/// exactly (residual is defined by subtraction).
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// Cluster labels in emission order (1..K).
    pub labels: Vec<usize>,
    pub components: Vec<Field>,
    pub pcs: Vec<Pcs>,
    pub residual: Field,
    pub variance_shares: Vec<f64>,
    pub residual_share: f64,
    /// Largest imaginary residual dropped when realizing components.
    pub worst_imag: f64,
}

/// Project the demeaned field onto each cluster's eigenvector span,
/// frequency by frequency, and reconstruct the dynamic components.
///
/// At supported bin j of cluster k the PCS spectrum is x(ω_j) = v*·ẑ(ω_j)
/// per eigenvector and the component spectrum gains v·x(ω_j); unsupported
/// bins stay zero. Inverse transforms yield real series (mirrored support),
/// and the residual is the field minus all components.
pub fn apply_decomposition(field: &Field, support: &MirroredSupport) -> Result<Decomposition> {
    let (m, n) = (support.m, support.n);
    if field.m() != m || field.n != n {
        return Err(PasfError::invalid(format!(
            "apply_decomposition: field is {}×{}, support expects {}×{}",
            field.m(),
            field.n,
            m,
            n
        )));
    }
    let zhat = crate::numerics::dft_rows(field.values(), m, n);
    let k = support.k;
    let mut comp_spec = vec![vec![Complex64::new(0.0, 0.0); m * n]; k];
    let mut pcs_spec: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(k);
    for label in 1..=k {
        let ch = support
            .entries
            .iter()
            .filter(|e| e.label == label)
            .map(|e| e.channel + 1)
            .max()
            .unwrap_or(0);
        if ch == 0 {
            return Err(PasfError::invalid(format!(
                "apply_decomposition: cluster {label} has no supported entries"
            )));
        }
        pcs_spec.push(vec![vec![Complex64::new(0.0, 0.0); n]; ch]);
    }

    for e in &support.entries {
        let j = e.bin;
        // α = v* ẑ(ω_j)
        let mut alpha = Complex64::new(0.0, 0.0);
        for s in 0..m {
            alpha += e.vector[s].conj() * zhat[s * n + j];
        }
        let spec = &mut comp_spec[e.label - 1];
        for s in 0..m {
            spec[s * n + j] += e.vector[s] * alpha;
        }
        pcs_spec[e.label - 1][e.channel][j] += alpha;
    }

    let mut components = Vec::with_capacity(k);
    let mut pcs = Vec::with_capacity(k);
    let mut worst_imag = 0.0f64;
    for (idx, spec) in comp_spec.iter().enumerate() {
        let (vals, wi) = idft_rows_real(spec, m, n);
        worst_imag = worst_imag.max(wi);
        components.push(Field::new(field.grid_h, field.grid_w, n, vals)?);
        let mut series = Vec::new();
        for ch_spec in &pcs_spec[idx] {
            let (s, wi) = idft_rows_real(ch_spec, 1, n);
            worst_imag = worst_imag.max(wi);
            series.push(s);
        }
        pcs.push(Pcs { label: idx + 1, channels: series.len(), series });
    }

    let mut residual = field.clone();
    for comp in &components {
        for (r, c) in residual.values_mut().iter_mut().zip(comp.values()) {
            *r -= c;
        }
    }
    let total = field.energy();
    let variance_shares: Vec<f64> = if total > 0.0 {
        components.iter().map(|c| c.energy() / total).collect()
    } else {
        vec![0.0; k]
    };
    let residual_share = if total > 0.0 { residual.energy() / total } else { 1.0 };
    Ok(Decomposition {
        labels: (1..=k).collect(),
        components,
        pcs,
        residual,
        variance_shares,
        residual_share,
        worst_imag,
    })
}

/// Fraction of the observed (demeaned) energy carried by a component:
/// Σ component² / Σ observed².
pub fn variance_explained(component: &Field, observed: &Field) -> Result<f64> {
    if component.m() != observed.m() || component.n != observed.n {
        return Err(PasfError::invalid("variance_explained: dimension mismatch"));
    }
    let total = observed.energy();
    if total <= 0.0 {
        return Err(PasfError::invalid("variance_explained: observed field has zero energy"));
    }
    Ok(component.energy() / total)
}

/// Maximum cross-cluster coherence |v_a* f̂(ω_j) v_b|²/(λ_a λ_b) over every
/// first-half bin supported by two different clusters. Disjoint supports
/// return 0.
pub fn pcs_coherence_check(support: &MirroredSupport, stack: &SpectralStack) -> Result<f64> {
    if support.m != stack.m || support.n != stack.n {
        return Err(PasfError::invalid("pcs_coherence_check: support/stack mismatch"));
    }
    let half = stack.half_indices();
    let mut by_bin: std::collections::BTreeMap<usize, Vec<&crate::eigensel::SupportEntry>> =
        std::collections::BTreeMap::new();
    for e in &support.entries {
        if half.contains(&e.bin) {
            by_bin.entry(e.bin).or_default().push(e);
        }
    }
    let mut max_coh = 0.0f64;
    for (&j, entries) in &by_bin {
        if entries.iter().map(|e| e.label).collect::<std::collections::BTreeSet<_>>().len() < 2 {
            continue;
        }
        for (i, a) in entries.iter().enumerate() {
            // f̂(ω_j)·v_b is reused across the a-loop only per pair; compute per b once.
            for b in entries.iter().skip(i + 1) {
                if a.label == b.label || a.value <= 0.0 || b.value <= 0.0 {
                    continue;
                }
                let fv = stack.apply(j, &b.vector);
                let cross: Complex64 = a
                    .vector
                    .iter()
                    .zip(fv.iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let coh = cross.norm_sqr() / (a.value * b.value);
                max_coh = max_coh.max(coh);
            }
        }
    }
    Ok(max_coh)
}

/// Brute-force time-domain application of built filters via circular
/// convolution — the quadratic-cost reference for the frequency-domain path.
///
/// PCS: x_ch(t) = Σ_τ Ĉ_τ[ch]·z((t−τ) mod n); reconstruction:
/// z̃_s(t) = Σ_ch Σ_τ B̂_τ[ch][s]·x_ch(t−τ).
pub fn apply_time_domain(field: &Field, filters: &[FilterPair]) -> Result<Vec<Field>> {
    let m = field.m();
    let n = field.n;
    let mut out = Vec::with_capacity(filters.len());
    for f in filters {
        if f.m != m || f.n != n {
            return Err(PasfError::invalid("apply_time_domain: filter/field dimension mismatch"));
        }
        let mut recon = vec![0.0f64; m * n];
        for ch in 0..f.channels {
            let c = &f.c_coeffs[ch];
            let b = &f.b_coeffs[ch];
            let mut x = vec![0.0f64; n];
            for t in 0..n {
                let mut acc = 0.0;
                for tau in 0..n {
                    let src = (t + n - tau) % n;
                    let row = &c[tau * m..(tau + 1) * m];
                    let mut dot = 0.0;
                    for s in 0..m {
                        dot += row[s] * field.values()[s * n + src];
                    }
                    acc += dot;
                }
                x[t] = acc;
            }
            for t in 0..n {
                for tau in 0..n {
                    let src = (t + n - tau) % n;
                    let col = &b[tau * m..(tau + 1) * m];
                    for s in 0..m {
                        recon[s * n + t] += col[s] * x[src];
                    }
                }
            }
        }
        out.push(Field::new(field.grid_h, field.grid_w, n, recon)?);
    }
    Ok(out)
}
