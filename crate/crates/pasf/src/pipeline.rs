//! End-to-end decomposition: demean → spectral estimation → per-frequency
//! eigendecomposition → threshold selection → phase unwrapping → clustering →
//! conjugate mirroring → projection, plus the run-directory writer.

use std::fs;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::eigensel::{self, EigenAtlas};
use crate::error::{PasfError, Result};
use crate::filterbank::{apply_decomposition, pcs_coherence_check, Decomposition};
use crate::io::{self, RunConfig, RunReport, ThresholdMode};
use crate::phasegeom::{self, ClusterCount, Merge, PhaseGrid};
use crate::spectral::{daniell_kernel, demean, estimate_spectral_density, Field};

/// Everything one decomposition run produces, in memory.
#[derive(Clone, Debug)]
pub struct DecomposeOutcome {
    pub report: RunReport,
    pub decomposition: Decomposition,
    /// Full merge record of the clustering, heights non-decreasing.
    pub merges: Vec<Merge>,
    /// Cluster label (1..K) per retained atlas entry.
    pub entry_labels: Vec<usize>,
    /// The retained eigenvector entries, in frequency-then-rank order.
    pub atlas: EigenAtlas,
    /// Unwrapped phase grid per atlas entry (same order).
    pub unwrapped: Vec<PhaseGrid>,
}

/// Result of the in-memory pipeline: either a full decomposition or the
/// degenerate case where the threshold retained nothing — still described by
/// a report (zero clusters, full residual) so callers can surface it.
#[derive(Clone, Debug)]
pub enum PipelineOutput {
    Full(Box<DecomposeOutcome>),
    EmptyAtlas { report: RunReport, residual: Field, message: String },
}

/// Run the decomposition in memory. No files are touched; `config.outdir`
/// is ignored here.
pub fn decompose_field(field: &Field, config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let mut timings: Vec<(String, u64)> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut stage = Instant::now();
    let lap = |name: &str, timings: &mut Vec<(String, u64)>, stage: &mut Instant| {
        timings.push((name.to_string(), stage.elapsed().as_millis() as u64));
        *stage = Instant::now();
    };

    if field.n < 4 {
        return Err(PasfError::invalid(format!(
            "decompose: series length n={} is too short (need ≥ 4 samples)",
            field.n
        )));
    }
    let centered = demean(field);
    if centered.energy() == 0.0 {
        return Err(PasfError::invalid(
            "decompose: field is constant over time (no variance to decompose)",
        ));
    }
    lap("demean", &mut timings, &mut stage);

    let kernel = daniell_kernel(config.q);
    let stack = estimate_spectral_density(&centered, &kernel)?;
    lap("spectral_density", &mut timings, &mut stage);

    let r = config.r.min(stack.m);
    if r < config.r {
        warnings.push(format!(
            "r={} exceeds the spatial dimension m={}; using r={}",
            config.r, stack.m, r
        ));
    }
    let per_freq = eigensel::decompose_stack(&stack, r)?;
    lap("eigendecomposition", &mut timings, &mut stage);

    let pooled: Vec<f64> = per_freq.iter().flat_map(|ps| ps.iter().map(|p| p.value)).collect();
    let (delta, mode) = if let Some(d) = config.delta {
        (d, ThresholdMode::Delta)
    } else if let Some(ns) = config.n_select {
        let mut sorted = pooled.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if ns > sorted.len() {
            warnings.push(format!(
                "n_select={} exceeds the {} pooled eigenvalues; retaining all",
                ns,
                sorted.len()
            ));
        }
        // Δ at the n_select-th largest pooled value retains at least n_select
        // entries (more on exact ties).
        (sorted[ns.min(sorted.len()) - 1], ThresholdMode::NSelect)
    } else {
        let th = eigensel::gap_threshold(&pooled)?;
        if th.degenerate {
            warnings.push("pooled eigenvalue spectrum is entirely non-positive".to_string());
        }
        (th.delta, if th.by_gap { ThresholdMode::Gap } else { ThresholdMode::Coverage })
    };
    let atlas = match eigensel::shrink(&per_freq, delta, r, centered.n, stack.m) {
        Ok(atlas) => atlas,
        Err(PasfError::EmptyAtlas(message)) => {
            lap("selection", &mut timings, &mut stage);
            let report = RunReport {
                selected: 0,
                delta,
                threshold_mode: mode,
                k: 0,
                k_auto: 0,
                shares: Vec::new(),
                residual_share: 1.0,
                coherence_max: 0.0,
                timings_ms: timings,
                warnings,
            };
            return Ok(PipelineOutput::EmptyAtlas { report, residual: centered, message });
        }
        Err(e) => return Err(e),
    };
    lap("selection", &mut timings, &mut stage);

    let (h, w) = (field.grid_h, field.grid_w);
    #[cfg(feature = "parallel")]
    let entry_iter = atlas.entries.par_iter();
    #[cfg(not(feature = "parallel"))]
    let entry_iter = atlas.entries.iter();
    let unwrapped: Vec<PhaseGrid> = entry_iter
        .map(|e| {
            let modulus: Vec<f64> = e.vector.iter().map(|c| c.norm()).collect();
            let grid = phasegeom::extract_phase(&e.vector, h, w)?;
            phasegeom::unwrap2d(&grid, &modulus)
        })
        .collect::<Result<Vec<_>>>()?;
    lap("phase_unwrap", &mut timings, &mut stage);

    let count = match config.k {
        Some(k) => ClusterCount::Fixed(k),
        None => ClusterCount::Auto,
    };
    let model = if unwrapped.len() == 1 {
        if let ClusterCount::Fixed(k) = count {
            if k != 1 {
                return Err(PasfError::invalid(format!(
                    "decompose: K={k} requested but only one entry was retained"
                )));
            }
        }
        phasegeom::ClusterModel { labels: vec![1], merges: Vec::new(), k: 1, k_auto: 1 }
    } else {
        let d = phasegeom::phase_dissimilarity(&unwrapped)?;
        if !d.degenerate.is_empty() {
            warnings.push(format!(
                "{} phase map(s) had zero variance across locations and were \
                 assigned maximal dissimilarity",
                d.degenerate.len()
            ));
        }
        phasegeom::ward_cluster(&d, count)?
    };
    lap("clustering", &mut timings, &mut stage);

    let support = eigensel::mirror(&atlas, &model.labels)?;
    let decomposition = apply_decomposition(&centered, &support)?;
    if decomposition.worst_imag > 1e-8 {
        warnings.push(format!(
            "projection left an imaginary residue of {:.3e} (expected ≈ machine epsilon)",
            decomposition.worst_imag
        ));
    }
    lap("projection", &mut timings, &mut stage);

    let coherence_max = pcs_coherence_check(&support, &stack)?;
    lap("coherence_check", &mut timings, &mut stage);

    let report = RunReport {
        selected: atlas.entries.len(),
        delta,
        threshold_mode: mode,
        k: model.k,
        k_auto: model.k_auto,
        shares: decomposition.variance_shares.clone(),
        residual_share: decomposition.residual_share,
        coherence_max,
        timings_ms: timings,
        warnings,
    };
    Ok(PipelineOutput::Full(Box::new(DecomposeOutcome {
        report,
        decomposition,
        merges: model.merges,
        entry_labels: model.labels,
        atlas,
        unwrapped,
    })))
}

/// Run the decomposition and write the run directory: per-cluster component
/// fields and PCS CSVs, the residual field, the dendrogram CSV, the report,
/// and a manifest. When the threshold retains nothing, the directory still
/// gets a zero-cluster report plus the full residual, and the call errors so
/// the caller can exit distinctly.
pub fn run_decompose(field: &Field, config: &RunConfig) -> Result<DecomposeOutcome> {
    fs::create_dir_all(&config.outdir)?;
    let params = serde_json::to_value(config)
        .map_err(|e| PasfError::invalid(format!("config serialization: {e}")))?;
    match decompose_field(field, config)? {
        PipelineOutput::Full(mut outcome) => {
            let t0 = Instant::now();
            let mut files = Vec::new();
            for (i, comp) in outcome.decomposition.components.iter().enumerate() {
                let name = format!("component_{}.field", i + 1);
                io::write_field(comp, config.outdir.join(&name))?;
                files.push(name);
            }
            io::write_field(&outcome.decomposition.residual, config.outdir.join("residual.field"))?;
            files.push("residual.field".to_string());
            for pcs in &outcome.decomposition.pcs {
                let name = format!("pcs_{}.csv", pcs.label);
                io::write_pcs_csv(pcs, config.outdir.join(&name))?;
                files.push(name);
            }
            io::write_dendrogram_csv(&outcome.merges, config.outdir.join("dendrogram.csv"))?;
            files.push("dendrogram.csv".to_string());
            outcome
                .report
                .timings_ms
                .push(("write_artifacts".to_string(), t0.elapsed().as_millis() as u64));
            io::write_report(&outcome.report, config.outdir.join("report.json"))?;
            files.push("report.json".to_string());
            files.push("manifest.json".to_string());
            io::write_manifest(&config.outdir, "decompose", &params, &files)?;
            Ok(*outcome)
        }
        PipelineOutput::EmptyAtlas { report, residual, message } => {
            io::write_field(&residual, config.outdir.join("residual.field"))?;
            io::write_report(&report, config.outdir.join("report.json"))?;
            let files = vec![
                "residual.field".to_string(),
                "report.json".to_string(),
                "manifest.json".to_string(),
            ];
            io::write_manifest(&config.outdir, "decompose", &params, &files)?;
            Err(PasfError::EmptyAtlas(message))
        }
    }
}
