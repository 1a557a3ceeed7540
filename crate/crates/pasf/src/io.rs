//! File formats and rendering: the `pasf-field` text format, run
//! configuration and report documents, CSV exports, heatmap frames, and the
//! run-directory manifest.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PasfError, Result};
use crate::filterbank::Pcs;
use crate::phasegeom::Merge;
use crate::spectral::Field;

/// Read a field from the `pasf-field v1` text format:
/// two header lines (`# pasf-field v1`, `# grid_h=<H> grid_w=<W> n=<N>`)
/// followed by n lines of m comma-separated values in row-major location
/// order. Parse failures name the offending 1-based line.
pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| PasfError::invalid(format!("{}: empty file", path.display())))?;
    if header.trim() != "# pasf-field v1" {
        return Err(PasfError::invalid(format!(
            "{}: line 1: expected `# pasf-field v1`, got `{header}`",
            path.display()
        )));
    }
    let dims = lines
        .next()
        .transpose()?
        .ok_or_else(|| PasfError::invalid(format!("{}: line 2: missing dimensions", path.display())))?;
    let (grid_h, grid_w, n) = parse_dims(&dims)
        .ok_or_else(|| PasfError::invalid(format!("{}: line 2: malformed `{dims}`", path.display())))?;
    let m = grid_h * grid_w;
    let mut values = vec![0.0f64; m * n];
    for t in 0..n {
        let line_no = t + 3;
        let line = lines.next().transpose()?.ok_or_else(|| {
            PasfError::invalid(format!(
                "{}: file ends at line {}: expected {n} data lines, found {t}",
                path.display(),
                t + 2
            ))
        })?;
        let mut count = 0usize;
        for (s, tok) in line.split(',').enumerate() {
            if s >= m {
                count = s + 1;
                break;
            }
            let v: f64 = tok.trim().parse().map_err(|_| {
                PasfError::invalid(format!(
                    "{}: line {line_no}: value {} (`{}`) is not a number",
                    path.display(),
                    s + 1,
                    tok.trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(PasfError::invalid(format!(
                    "{}: line {line_no}: value {} is not finite",
                    path.display(),
                    s + 1
                )));
            }
            values[s * n + t] = v;
            count = s + 1;
        }
        if count != m {
            return Err(PasfError::invalid(format!(
                "{}: line {line_no}: expected {m} values, found {count}",
                path.display()
            )));
        }
    }
    for (extra, line) in lines.enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            return Err(PasfError::invalid(format!(
                "{}: line {}: unexpected trailing content",
                path.display(),
                n + 3 + extra
            )));
        }
    }
    Field::new(grid_h, grid_w, n, values)
}

fn parse_dims(line: &str) -> Option<(usize, usize, usize)> {
    let rest = line.trim().strip_prefix('#')?.trim();
    let mut grid_h = None;
    let mut grid_w = None;
    let mut n = None;
    for part in rest.split_whitespace() {
        let (key, value) = part.split_once('=')?;
        let value: usize = value.parse().ok()?;
        match key {
            "grid_h" => grid_h = Some(value),
            "grid_w" => grid_w = Some(value),
            "n" => n = Some(value),
            _ => return None,
        }
    }
    Some((grid_h?, grid_w?, n?))
}

/// Write a field in the `pasf-field v1` format with 17 significant digits,
/// which round-trips f64 exactly.
pub fn write_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# pasf-field v1")?;
    writeln!(w, "# grid_h={} grid_w={} n={}", field.grid_h, field.grid_w, field.n)?;
    let m = field.m();
    let mut line = String::new();
    for t in 0..field.n {
        line.clear();
        for s in 0..m {
            if s > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.16e}", field.values()[s * field.n + t]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn none_is_auto<'de, D>(de: D) -> std::result::Result<Option<usize>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    // Accept "auto" (or null) for the cluster count alongside an integer.
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(usize),
        Text(String),
        Null,
    }
    match Raw::deserialize(de)? {
        Raw::Int(k) => Ok(Some(k)),
        Raw::Text(s) if s == "auto" => Ok(None),
        Raw::Text(s) => Err(serde::de::Error::custom(format!("K must be an integer or \"auto\", got `{s}`"))),
        Raw::Null => Ok(None),
    }
}

/// Decomposition parameters. Field names match the CLI flags; a JSON config
/// file with any subset of them is accepted.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Daniell kernel half-width (smoothing bandwidth 2q+1).
    #[serde(default = "default_q")]
    pub q: usize,
    /// Eigenvalue ranks kept per frequency before shrinkage.
    #[serde(default = "default_r")]
    pub r: usize,
    /// Explicit shrinkage threshold; overrides the pooled-gap rule.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Target retained-entry count; overrides the gap rule (Δ becomes the
    /// n_select-th largest pooled eigenvalue).
    #[serde(default)]
    pub n_select: Option<usize>,
    /// Cluster count; None means automatic.
    #[serde(default, deserialize_with = "none_is_auto")]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_outdir")]
    pub outdir: PathBuf,
}

fn default_q() -> usize {
    10
}
fn default_r() -> usize {
    5
}
fn default_outdir() -> PathBuf {
    PathBuf::from("pasf-run")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            q: default_q(),
            r: default_r(),
            delta: None,
            n_select: None,
            k: None,
            seed: 0,
            outdir: default_outdir(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(PasfError::invalid("config: r must be ≥ 1"));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) {
                return Err(PasfError::invalid("config: delta must be ≥ 0"));
            }
        }
        if self.n_select == Some(0) {
            return Err(PasfError::invalid("config: n_select must be ≥ 1"));
        }
        if self.k == Some(0) {
            return Err(PasfError::invalid("config: K must be ≥ 1"));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PasfError::invalid(format!("{}: {e}", path.as_ref().display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How the shrinkage threshold was chosen.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Decisive pooled-eigenvalue ratio gap.
    Gap,
    /// Energy-coverage fallback (no decisive gap).
    Coverage,
    /// Explicit Δ from the config.
    Delta,
    /// Explicit target entry count from the config.
    NSelect,
}

/// Machine-readable summary of one decomposition run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub selected: usize,
    pub delta: f64,
    pub threshold_mode: ThresholdMode,
    pub k: usize,
    pub k_auto: usize,
    /// Per-cluster variance shares, cluster ids 1..K in order.
    pub shares: Vec<f64>,
    pub residual_share: f64,
    pub coherence_max: f64,
    /// Stage name → elapsed milliseconds.
    pub timings_ms: Vec<(String, u64)>,
    pub warnings: Vec<String>,
}

pub fn write_report(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| PasfError::invalid(format!("report serialization: {e}")))?;
    fs::write(path.as_ref(), text)?;
    Ok(())
}

/// Write one cluster's principal component series as CSV
/// (columns: t, channel_1..channel_c).
pub fn write_pcs_csv(pcs: &Pcs, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=pcs.channels).map(|c| format!("channel_{c}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let n = pcs.series.first().map(|s| s.len()).unwrap_or(0);
    for t in 0..n {
        let mut line = t.to_string();
        for ch in &pcs.series {
            line.push(',');
            line.push_str(&format!("{:.16e}", ch[t]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Write the merge record as CSV (columns: step, left, right, height).
pub fn write_dendrogram_csv(merges: &[Merge], path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "step,left,right,height")?;
    for (i, m) in merges.iter().enumerate() {
        writeln!(w, "{i},{},{},{:.16e}", m.left, m.right, m.height)?;
    }
    w.flush()?;
    Ok(())
}

/// Record of every artifact a command wrote, plus the parameters behind it.
pub fn write_manifest(
    outdir: &Path,
    command: &str,
    params: &serde_json::Value,
    files: &[String],
) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": "pasf",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "params": params,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| PasfError::invalid(format!("manifest serialization: {e}")))?;
    fs::write(outdir.join("manifest.json"), text)?;
    Ok(())
}

/// Render field snapshots t_from..=t_to as binary PPM images with a
/// diverging blue–white–red colormap symmetric about zero and one shared
/// scale across the range (recorded in a `<prefix>scale.json` sidecar).
/// Returns the written image paths.
pub fn emit_heatmaps(
    field: &Field,
    t_from: usize,
    t_to: usize,
    prefix: impl AsRef<Path>,
    upscale: usize,
) -> Result<Vec<PathBuf>> {
    if t_from > t_to || t_to >= field.n {
        return Err(PasfError::invalid(format!(
            "emit_heatmaps: range {t_from}..={t_to} out of bounds (n={})",
            field.n
        )));
    }
    let upscale = upscale.max(1);
    let mut scale = 0.0f64;
    for t in t_from..=t_to {
        for s in 0..field.m() {
            scale = scale.max(field.values()[s * field.n + t].abs());
        }
    }
    let prefix = prefix.as_ref();
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut paths = Vec::new();
    for t in t_from..=t_to {
        let path = append_to_filename(prefix, &format!("t{t:05}.ppm"));
        write_ppm(field, t, scale, upscale, &path)?;
        paths.push(path);
    }
    let sidecar = append_to_filename(prefix, "scale.json");
    let meta = serde_json::json!({
        "scale": scale,
        "t_from": t_from,
        "t_to": t_to,
        "grid_h": field.grid_h,
        "grid_w": field.grid_w,
        "upscale": upscale,
        "files": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    fs::write(
        &sidecar,
        serde_json::to_string_pretty(&meta)
            .map_err(|e| PasfError::invalid(format!("sidecar serialization: {e}")))?,
    )?;
    Ok(paths)
}

fn append_to_filename(prefix: &Path, suffix: &str) -> PathBuf {
    let mut os = prefix.as_os_str().to_os_string();
    os.push(suffix);
    PathBuf::from(os)
}

/// Diverging colormap: −scale → deep blue, 0 → white, +scale → deep red.
pub fn diverging_rgb(value: f64, scale: f64) -> [u8; 3] {
    let t = if scale > 0.0 { (value / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64, x: f64| (a + (b - a) * x).round().clamp(0.0, 255.0) as u8;
    if t >= 0.0 {
        [lerp(255.0, 178.0, t), lerp(255.0, 24.0, t), lerp(255.0, 43.0, t)]
    } else {
        let x = -t;
        [lerp(255.0, 33.0, x), lerp(255.0, 102.0, x), lerp(255.0, 172.0, x)]
    }
}

fn write_ppm(field: &Field, t: usize, scale: f64, upscale: usize, path: &Path) -> Result<()> {
    let (h, w) = (field.grid_h * upscale, field.grid_w * upscale);
    let mut data = Vec::with_capacity(h * w * 3);
    for row in 0..h {
        for col in 0..w {
            let s = (row / upscale) * field.grid_w + (col / upscale);
            let rgb = diverging_rgb(field.values()[s * field.n + t], scale);
            data.extend_from_slice(&rgb);
        }
    }
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write!(out, "P6\n{w} {h}\n255\n")?;
    out.write_all(&data)?;
    out.flush()?;
    Ok(())
}
