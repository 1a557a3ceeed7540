//! Development harness: sweep simulation seeds through the full pipeline and
//! print, per seed, everything the benchmark checks care about.
//!
//! Usage: scan rotating <from> <to> | scan propagation <from> <to>

use pasf::io::RunConfig;
use pasf::pipeline::{decompose_field, PipelineOutput};
use pasf::simkit::{
    simulate_propagation, simulate_rotating, PropagationSpec, RotatingSourceSpec,
};
use pasf::spectral::Field;

fn pooled_corr(a: &Field, b: &Field) -> f64 {
    let (av, bv) = (a.values(), b.values());
    let n = av.len() as f64;
    let (ma, mb) = (av.iter().sum::<f64>() / n, bv.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in av.iter().zip(bv) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).abs()
}

/// Best one-to-one matching (maximize the minimum correlation) between
/// recovered and true components; returns the per-recovered correlations
/// under that matching.
fn best_matching(recovered: &[Field], truth: &[Field]) -> Vec<f64> {
    let k = recovered.len().min(truth.len());
    let corr: Vec<Vec<f64>> =
        recovered.iter().map(|r| truth.iter().map(|t| pooled_corr(r, t)).collect()).collect();
    let mut perm: Vec<usize> = (0..truth.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    permute(&mut perm, 0, &mut |p| {
        let vals: Vec<f64> = (0..k).map(|i| corr[i][p[i]]).collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if best.as_ref().map_or(true, |(m, _)| min > *m) {
            best = Some((min, vals));
        }
    });
    best.map(|(_, v)| v).unwrap_or_default()
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn scan_rotating(from: u64, to: u64) {
    let specs = RotatingSourceSpec::scenario_defaults();
    for seed in from..to {
        for sigma2 in [0.16, 4.0, 16.0] {
            let sim = simulate_rotating(&specs, 1000, sigma2, seed, Some(1.6)).unwrap();
            let config = RunConfig::default();
            let t0 = std::time::Instant::now();
            match decompose_field(&sim.observed, &config) {
                Ok(PipelineOutput::Full(out)) => {
                    let r = &out.report;
                    let sh = sorted_desc(&r.shares);
                    let pass = match sigma2 {
                        s if s == 0.16 => {
                            r.k == 2
                                && sh.len() == 2
                                && (sh[0] - 0.48).abs() <= 0.05
                                && (sh[1] - 0.47).abs() <= 0.05
                                && (60..=100).contains(&r.selected)
                        }
                        s if s == 4.0 => {
                            r.k == 2 && sh.len() == 2 && sh.iter().all(|v| (v - 0.23).abs() <= 0.05)
                        }
                        _ => {
                            r.k == 2
                                && sh.len() == 2
                                && sh.iter().all(|v| (v - 0.08).abs() <= 0.04)
                                && (25..=55).contains(&r.selected)
                        }
                    };
                    println!(
                        "rot seed={seed} s2={sigma2:<5} k={} sel={:<4} mode={:?} shares={:?} coh={:.2e} {}ms pass={}",
                        r.k,
                        r.selected,
                        r.threshold_mode,
                        sh.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                        r.coherence_max,
                        t0.elapsed().as_millis(),
                        pass
                    );
                }
                Ok(PipelineOutput::EmptyAtlas { .. }) => {
                    println!("rot seed={seed} s2={sigma2} EMPTY ATLAS");
                }
                Err(e) => println!("rot seed={seed} s2={sigma2} ERROR {e}"),
            }
        }
    }
}

fn scan_propagation(from: u64, to: u64) {
    let specs = PropagationSpec::scenario_defaults();
    for seed in from..to {
        let sim = simulate_propagation(&specs, 1000, seed).unwrap();
        let config = RunConfig::default();
        let t0 = std::time::Instant::now();
        match decompose_field(&sim.observed, &config) {
            Ok(PipelineOutput::Full(out)) => {
                let r = &out.report;
                let sh = sorted_desc(&r.shares);
                let corrs = if r.k == 4 {
                    best_matching(&out.decomposition.components, &sim.components)
                } else {
                    Vec::new()
                };
                let mincorr = corrs.iter().cloned().fold(f64::INFINITY, f64::min);
                let want = [0.36, 0.31, 0.16, 0.14];
                let shares_ok = sh.len() == 4
                    && sh.iter().zip(&want).all(|(got, w)| (got - w).abs() <= 0.06);
                let pass = r.k == 4 && shares_ok && mincorr >= 0.85;
                println!(
                    "prop seed={seed} k={} sel={:<4} mode={:?} shares={:?} mincorr={:.3} coh={:.2e} {}ms pass={}",
                    r.k,
                    r.selected,
                    r.threshold_mode,
                    sh.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                    if mincorr.is_finite() { mincorr } else { -1.0 },
                    r.coherence_max,
                    t0.elapsed().as_millis(),
                    pass
                );
            }
            Ok(PipelineOutput::EmptyAtlas { .. }) => println!("prop seed={seed} EMPTY ATLAS"),
            Err(e) => println!("prop seed={seed} ERROR {e}"),
        }
    }
}

/// Dump the clustering internals for one run: per-entry bin/rank/λ with
/// labels, and the tail of the merge-height ladder that auto-K reads.
fn debug_run(scenario: &str, seed: u64, sigma2: f64) {
    let observed = match scenario {
        "rotating" => {
            simulate_rotating(&RotatingSourceSpec::scenario_defaults(), 1000, sigma2, seed, Some(1.6))
                .unwrap()
                .observed
        }
        _ => simulate_propagation(&PropagationSpec::scenario_defaults(), 1000, seed).unwrap().observed,
    };
    let config = RunConfig::default();
    match decompose_field(&observed, &config).unwrap() {
        PipelineOutput::Full(out) => {
            let r = &out.report;
            println!(
                "seed={seed} s2={sigma2}: k={} k_auto={} selected={} delta={:.4e} shares={:?}",
                r.k, r.k_auto, r.selected, r.delta, r.shares
            );
            let heights: Vec<f64> = out.merges.iter().map(|m| m.height).collect();
            let tail = &heights[heights.len().saturating_sub(12)..];
            println!("merge-height tail: {tail:?}");
            for (label, entries) in cluster_entries(&out.entry_labels, &out.atlas.entries) {
                let mut bins: Vec<usize> = entries.iter().map(|e| e.freq_index).collect();
                bins.sort_unstable();
                let lo = bins.first().copied().unwrap_or(0);
                let hi = bins.last().copied().unwrap_or(0);
                let ranks: std::collections::BTreeMap<usize, usize> =
                    entries.iter().fold(Default::default(), |mut acc, e| {
                        *acc.entry(e.rank).or_default() += 1;
                        acc
                    });
                println!("cluster {label}: {} entries, bins {lo}..{hi}, ranks {ranks:?}", entries.len());
            }
        }
        PipelineOutput::EmptyAtlas { .. } => println!("empty atlas"),
    }
}

fn cluster_entries<'a>(
    labels: &[usize],
    entries: &'a [pasf::eigensel::EigenEntry],
) -> Vec<(usize, Vec<&'a pasf::eigensel::EigenEntry>)> {
    let k = labels.iter().copied().max().unwrap_or(0);
    (1..=k)
        .map(|lab| {
            (
                lab,
                labels
                    .iter()
                    .zip(entries)
                    .filter(|(l, _)| **l == lab)
                    .map(|(_, e)| e)
                    .collect(),
            )
        })
        .collect()
}

/// Per-cluster phase-vs-frequency R² over rank-1 entries (the linearity
/// check), joined with the share/correlation windows, per seed.
fn scan_propagation_linearity(from: u64, to: u64) {
    let specs = PropagationSpec::scenario_defaults();
    for seed in from..to {
        let sim = simulate_propagation(&specs, 1000, seed).unwrap();
        let config = RunConfig::default();
        match decompose_field(&sim.observed, &config) {
            Ok(PipelineOutput::Full(out)) => {
                let r = &out.report;
                let sh = sorted_desc(&r.shares);
                let corrs = best_matching(&out.decomposition.components, &sim.components);
                let mincorr = corrs.iter().cloned().fold(f64::INFINITY, f64::min);
                let want = [0.36, 0.31, 0.16, 0.14];
                let shares_ok = sh.len() == 4
                    && sh.iter().zip(&want).all(|(got, w)| (got - w).abs() <= 0.06);
                let n = sim.observed.n as f64;
                let mut r2s = Vec::new();
                for label in 1..=r.k {
                    let mut freqs = Vec::new();
                    let mut unwrapped: Vec<Vec<f64>> = Vec::new();
                    let mut moduli: Vec<Vec<f64>> = Vec::new();
                    for (i, e) in out.atlas.entries.iter().enumerate() {
                        if out.entry_labels[i] == label && e.rank == 1 {
                            freqs.push(e.freq_index as f64 / n);
                            unwrapped.push(out.unwrapped[i].values.clone());
                            moduli.push(e.vector.iter().map(|c| c.norm()).collect());
                        }
                    }
                    if freqs.len() < 2 {
                        r2s.push(f64::NAN);
                        continue;
                    }
                    r2s.push(pasf::phasegeom::phase_linearity(&freqs, &unwrapped, &moduli).unwrap().r2);
                }
                let min_r2 = r2s.iter().cloned().fold(f64::INFINITY, f64::min);
                let pass4 = r.k == 4 && shares_ok && mincorr >= 0.85;
                let pass6 = r.k == 4 && min_r2 >= 0.95;
                println!(
                    "prop seed={seed} k={} mincorr={mincorr:.3} shares_ok={shares_ok} r2={:?} pass_shares={pass4} pass_lin={pass6} both={}",
                    r.k,
                    r2s.iter().map(|v| (v * 10000.0).round() / 10000.0).collect::<Vec<_>>(),
                    pass4 && pass6
                );
            }
            Ok(PipelineOutput::EmptyAtlas { .. }) => println!("prop seed={seed} EMPTY ATLAS"),
            Err(e) => println!("prop seed={seed} ERROR {e}"),
        }
    }
}

/// Write every retained entry's per-location modulus and wrapped/unwrapped
/// phases to JSON for offline analysis.
fn dump_entries(scenario: &str, seed: u64, sigma2: f64, path: &str) {
    let observed = match scenario {
        "rotating" => {
            simulate_rotating(&RotatingSourceSpec::scenario_defaults(), 1000, sigma2, seed, Some(1.6))
                .unwrap()
                .observed
        }
        _ => simulate_propagation(&PropagationSpec::scenario_defaults(), 1000, seed).unwrap().observed,
    };
    let config = RunConfig::default();
    let out = match decompose_field(&observed, &config).unwrap() {
        PipelineOutput::Full(out) => out,
        PipelineOutput::EmptyAtlas { .. } => panic!("empty atlas"),
    };
    let entries: Vec<serde_json::Value> = out
        .atlas
        .entries
        .iter()
        .zip(&out.entry_labels)
        .zip(&out.unwrapped)
        .map(|((e, label), unwrapped)| {
            let modulus: Vec<f64> = e.vector.iter().map(|v| v.norm()).collect();
            let wrapped: Vec<f64> = e.vector.iter().map(|v| v.arg()).collect();
            serde_json::json!({
                "bin": e.freq_index,
                "rank": e.rank,
                "lambda": e.value,
                "label": label,
                "modulus": modulus,
                "wrapped": wrapped,
                "unwrapped": unwrapped.values,
            })
        })
        .collect();
    let merges: Vec<serde_json::Value> = out
        .merges
        .iter()
        .map(|m| serde_json::json!({"left": m.left, "right": m.right, "height": m.height}))
        .collect();
    let doc = serde_json::json!({
        "scenario": scenario,
        "seed": seed,
        "sigma2": sigma2,
        "grid": 20,
        "k": out.report.k,
        "shares": out.report.shares,
        "entries": entries,
        "merges": merges,
    });
    std::fs::write(path, serde_json::to_string(&doc).unwrap()).unwrap();
    println!("wrote {path}: {} entries, k={}", out.atlas.entries.len(), out.report.k);
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("rotating");
    let from: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let to: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(from + 10);
    match mode {
        "rotating" => scan_rotating(from, to),
        "propagation" => scan_propagation(from, to),
        "proplin" => scan_propagation_linearity(from, to),
        "debug" => {
            let scenario = args.get(2).map(|s| s.as_str()).unwrap_or("rotating");
            let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
            let sigma2: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.16);
            debug_run(scenario, seed, sigma2);
        }
        "dump" => {
            let scenario = args.get(2).map(|s| s.as_str()).unwrap_or("rotating");
            let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
            let sigma2: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.16);
            let default_path = format!("/root/notes/dump_{scenario}_{seed}.json");
            let path = args.get(5).map(|s| s.as_str()).unwrap_or(&default_path);
            dump_entries(scenario, seed, sigma2, path);
        }
        other => eprintln!("unknown mode `{other}` (rotating|propagation|debug|dump)"),
    }
}
