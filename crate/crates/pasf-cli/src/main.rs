//! `pasf`: decompose spatiotemporal fields into phase-aligned dynamic
//! components, simulate the benchmark scenarios, run the PCA baseline, and
//! render field snapshots.
//!
//! Every subcommand writes all of its outputs under one run directory with a
//! `manifest.json` recording the command, parameters, and file list.
//!
//! Exit codes: 0 success, 2 invalid input, 3 empty atlas (threshold retained
//! nothing), 4 I/O failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pasf::baseline::pca_decompose;
use pasf::error::{PasfError, Result};
use pasf::io::{self, RunConfig};
use pasf::pipeline::run_decompose;
use pasf::simkit::{
    simulate_propagation, simulate_rotating, PropagationSpec, RotatingSourceSpec, SimOutput,
    PROPAGATION_DEMO_SEED, ROTATING_DEMO_SEED,
};
use pasf::spectral::demean;

#[derive(Parser)]
#[command(
    name = "pasf",
    version,
    about = "Phase-aligned spectral filtering for spatiotemporal fields",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark scenario and write it as field files.
    Simulate {
        #[command(subcommand)]
        scenario: Scenario,
    },
    /// Decompose a field file into phase-aligned dynamic components.
    Decompose(DecomposeArgs),
    /// PCA baseline decomposition; same output layout as `decompose`.
    Baseline(BaselineArgs),
    /// Render field snapshots as PPM heatmap frames with a shared scale.
    Render(RenderArgs),
}

#[derive(Subcommand)]
enum Scenario {
    /// Two rotating energy sources (periods 20 and 5) on a 20×20 grid.
    Rotating(RotatingArgs),
    /// Four AR(2) corner sources propagating across a 20×20 grid.
    Propagation(PropagationArgs),
}

#[derive(Args)]
struct RotatingArgs {
    /// Series length.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Observation noise variance per location.
    #[arg(long, default_value_t = 0.16)]
    noise_variance: f64,
    /// RNG seed (initial angles and noise).
    #[arg(long, default_value_t = ROTATING_DEMO_SEED)]
    seed: u64,
    /// Pooled variance each source is rescaled to.
    #[arg(long, default_value_t = 1.6, conflicts_with = "no_rescale")]
    signal_variance: f64,
    /// Keep raw block-integral energies instead of rescaling.
    #[arg(long)]
    no_rescale: bool,
    /// Override the energy-kernel bandwidth of both sources.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "pasf-sim")]
    outdir: PathBuf,
}

#[derive(Args)]
struct PropagationArgs {
    /// Series length.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// RNG seed (AR innovations).
    #[arg(long, default_value_t = PROPAGATION_DEMO_SEED)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "pasf-sim")]
    outdir: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Input field file.
    #[arg(long)]
    input: PathBuf,
    /// JSON config file; explicit flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Daniell kernel half-width (smoothing bandwidth 2q+1).
    #[arg(long)]
    q: Option<usize>,
    /// Eigenvalue ranks kept per frequency before shrinkage.
    #[arg(long)]
    r: Option<usize>,
    /// Explicit shrinkage threshold; overrides the pooled-gap rule.
    #[arg(long)]
    delta: Option<f64>,
    /// Target retained-entry count; overrides the gap rule.
    #[arg(long)]
    n_select: Option<usize>,
    /// Cluster count, or `auto` for the merge-gap rule.
    #[arg(long)]
    k: Option<String>,
    /// Seed recorded in the report (the decomposition itself is
    /// deterministic).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    outdir: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Input field file.
    #[arg(long)]
    input: PathBuf,
    /// Number of principal components.
    #[arg(long)]
    k: usize,
    /// Output directory.
    #[arg(long, default_value = "pasf-baseline")]
    outdir: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Input field file.
    #[arg(long)]
    input: PathBuf,
    /// First frame index (0-based).
    #[arg(long)]
    from: usize,
    /// Last frame index, inclusive.
    #[arg(long)]
    to: usize,
    /// Filename prefix for the emitted frames.
    #[arg(long, default_value = "frame_")]
    prefix: String,
    /// Integer pixel upscaling factor.
    #[arg(long, default_value_t = 8)]
    upscale: usize,
    /// Output directory.
    #[arg(long, default_value = "pasf-render")]
    outdir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario } => cmd_simulate(scenario),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Render(args) => cmd_render(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pasf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_simulate(scenario: Scenario) -> Result<()> {
    let (sim, outdir) = match scenario {
        Scenario::Rotating(args) => {
            let mut specs = RotatingSourceSpec::scenario_defaults();
            if let Some(g) = args.gamma {
                for s in &mut specs {
                    s.gamma = g;
                }
            }
            let signal = if args.no_rescale { None } else { Some(args.signal_variance) };
            (simulate_rotating(&specs, args.n, args.noise_variance, args.seed, signal)?, args.outdir)
        }
        Scenario::Propagation(args) => {
            let specs = PropagationSpec::scenario_defaults();
            (simulate_propagation(&specs, args.n, args.seed)?, args.outdir)
        }
    };
    write_sim(&sim, &outdir)
}

fn write_sim(sim: &SimOutput, outdir: &PathBuf) -> Result<()> {
    fs::create_dir_all(outdir)?;
    let mut files = Vec::new();
    io::write_field(&sim.observed, outdir.join("observed.field"))?;
    files.push("observed.field".to_string());
    for (i, comp) in sim.components.iter().enumerate() {
        let name = format!("component_{}.field", i + 1);
        io::write_field(comp, outdir.join(&name))?;
        files.push(name);
    }
    let params_text = serde_json::to_string_pretty(&sim.params)
        .map_err(|e| PasfError::invalid(format!("params serialization: {e}")))?;
    fs::write(outdir.join("params.json"), params_text)?;
    files.push("params.json".to_string());
    for w in &sim.warnings {
        eprintln!("pasf: warning: {w}");
    }
    io::write_manifest(outdir, "simulate", &sim.params, &files)?;
    println!(
        "wrote observed field ({}×{} grid, n={}) and {} true components to {}",
        sim.observed.grid_h,
        sim.observed.grid_w,
        sim.observed.n,
        sim.components.len(),
        outdir.display()
    );
    Ok(())
}

/// Defaults ← config file ← explicit flags, in increasing precedence.
fn merge_config(args: &DecomposeArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(q) = args.q {
        config.q = q;
    }
    if let Some(r) = args.r {
        config.r = r;
    }
    if let Some(delta) = args.delta {
        config.delta = Some(delta);
    }
    if let Some(n_select) = args.n_select {
        config.n_select = Some(n_select);
    }
    if let Some(k) = &args.k {
        config.k = match k.as_str() {
            "auto" => None,
            other => Some(other.parse::<usize>().map_err(|_| {
                PasfError::invalid(format!("--k must be `auto` or a positive integer, got `{other}`"))
            })?),
        };
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(outdir) = &args.outdir {
        config.outdir = outdir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_decompose(args: DecomposeArgs) -> Result<()> {
    let field = io::read_field(&args.input)?;
    let config = merge_config(&args)?;
    let outcome = run_decompose(&field, &config)?;
    let r = &outcome.report;
    for w in &r.warnings {
        eprintln!("pasf: warning: {w}");
    }
    println!("selected {} eigenvector entries (Δ = {:.6e}, {:?})", r.selected, r.delta, r.threshold_mode);
    println!(
        "{} clusters (auto rule: {}); variance shares {:?}; residual {:.4}",
        r.k,
        r.k_auto,
        r.shares.iter().map(|v| (v * 10000.0).round() / 10000.0).collect::<Vec<_>>(),
        r.residual_share
    );
    println!("paired-filter coherence max {:.3e}", r.coherence_max);
    println!("run directory: {}", config.outdir.display());
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let field = io::read_field(&args.input)?;
    let centered = demean(&field);
    let (model, components) = pca_decompose(&centered, args.k)?;
    fs::create_dir_all(&args.outdir)?;
    let mut files = Vec::new();

    let mut residual = centered.values().to_vec();
    for comp in &components {
        for (r, v) in residual.iter_mut().zip(comp.values()) {
            *r -= v;
        }
    }
    for (i, comp) in components.iter().enumerate() {
        let name = format!("component_{}.field", i + 1);
        io::write_field(comp, args.outdir.join(&name))?;
        files.push(name);
    }
    let residual =
        pasf::spectral::Field::new(centered.grid_h, centered.grid_w, centered.n, residual)?;
    io::write_field(&residual, args.outdir.join("residual.field"))?;
    files.push("residual.field".to_string());

    let scores_path = args.outdir.join("scores.csv");
    write_scores_csv(&model.scores, &scores_path)?;
    files.push("scores.csv".to_string());

    let residual_share = (1.0 - model.shares.iter().sum::<f64>()).max(0.0);
    let report = serde_json::json!({
        "method": "pca",
        "k": args.k,
        "shares": model.shares,
        "residual_share": residual_share,
    });
    let report_text = serde_json::to_string_pretty(&report)
        .map_err(|e| PasfError::invalid(format!("report serialization: {e}")))?;
    fs::write(args.outdir.join("report.json"), report_text)?;
    files.push("report.json".to_string());

    let params = serde_json::json!({"input": args.input.display().to_string(), "k": args.k});
    io::write_manifest(&args.outdir, "baseline", &params, &files)?;
    println!(
        "PCA with k={}: shares {:?}; residual {:.4}; run directory: {}",
        args.k,
        model.shares.iter().map(|v| (v * 10000.0).round() / 10000.0).collect::<Vec<_>>(),
        residual_share,
        args.outdir.display()
    );
    Ok(())
}

fn write_scores_csv(scores: &[Vec<f64>], path: &PathBuf) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (1..=scores.len()).map(|i| format!("component_{i}")).collect();
    writeln!(w, "t,{}", header.join(","))?;
    let n = scores.first().map_or(0, |s| s.len());
    for t in 0..n {
        let row: Vec<String> = scores.iter().map(|s| format!("{:.16e}", s[t])).collect();
        writeln!(w, "{t},{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let field = io::read_field(&args.input)?;
    fs::create_dir_all(&args.outdir)?;
    let prefix = args.outdir.join(&args.prefix);
    let written = io::emit_heatmaps(&field, args.from, args.to, &prefix, args.upscale)?;
    let mut files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    files.push(format!("{}scale.json", args.prefix));
    let params = serde_json::json!({
        "input": args.input.display().to_string(),
        "from": args.from,
        "to": args.to,
        "prefix": args.prefix,
        "upscale": args.upscale,
    });
    io::write_manifest(&args.outdir, "render", &params, &files)?;
    println!("wrote {} frames to {}", written.len(), args.outdir.display());
    Ok(())
}
