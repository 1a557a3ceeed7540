//! Phase geometry: extracting eigenvector phases, unwrapping them over the
//! 2D grid by reliability-ordered region merging, the one-minus-correlation
//! dissimilarity, Ward clustering, and the phase-vs-frequency linearity
//! statistic.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{PasfError, Result};
use crate::numerics::Complex64;

const TWO_PI: f64 = 2.0 * PI;

/// Map an angle to its principal value in (−π, π].
pub fn wrap_to_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TWO_PI);
    if y == 0.0 {
        PI
    } else {
        y - PI
    }
}

/// Phase values (radians) on the spatial grid, row-major like `Field`.
#[derive(Clone, Debug)]
pub struct PhaseGrid {
    pub grid_h: usize,
    pub grid_w: usize,
    pub values: Vec<f64>,
    /// True when all values are principal (−π, π]; false after unwrapping.
    pub wrapped: bool,
}

/// Principal argument of each eigenvector component on the grid.
/// Zero components get phase 0 (and are down-weighted by the unwrapper's
/// modulus gate rather than trusted).
pub fn extract_phase(v: &DVector<Complex64>, grid_h: usize, grid_w: usize) -> Result<PhaseGrid> {
    if v.len() != grid_h * grid_w {
        return Err(PasfError::invalid(format!(
            "extract_phase: vector length {} != {}×{} grid",
            v.len(),
            grid_h,
            grid_w
        )));
    }
    let values = v
        .iter()
        .map(|c| if c.norm_sqr() == 0.0 { 0.0 } else { c.im.atan2(c.re) })
        .collect();
    Ok(PhaseGrid { grid_h, grid_w, values, wrapped: true })
}

/// Unwrap a wrapped phase grid by reliability-ordered region merging.
///
/// Pixel reliability is the reciprocal of the sum of squared wrapped second
/// differences along the horizontal, vertical, and both diagonal directions;
/// border pixels get minimal reliability, and pixels whose modulus is below
/// 1e-3 of the maximum are down-weighted by 1e-12 (their phase carries no
/// energy). All 4-neighbor edges are visited in order of decreasing summed
/// endpoint reliability; each edge merges its two regions with the 2π
/// multiple that removes the edge jump. The output differs from the input by
/// an integer multiple of 2π at every pixel, anchored so the most reliable
/// pixel keeps its wrapped value.
pub fn unwrap2d(grid: &PhaseGrid, modulus: &[f64]) -> Result<PhaseGrid> {
    let (h, w) = (grid.grid_h, grid.grid_w);
    let m = h * w;
    if modulus.len() != m {
        return Err(PasfError::invalid("unwrap2d: modulus length != grid size"));
    }
    let ph = &grid.values;

    // Reliability: interior second differences; borders stay at 0.
    let mut rel = vec![0.0f64; m];
    if h >= 3 && w >= 3 {
        for i in 1..h - 1 {
            for j in 1..w - 1 {
                let c = ph[i * w + j];
                let h2 = wrap_to_pi(ph[i * w + j - 1] - c) - wrap_to_pi(c - ph[i * w + j + 1]);
                let v2 = wrap_to_pi(ph[(i - 1) * w + j] - c) - wrap_to_pi(c - ph[(i + 1) * w + j]);
                let d1 =
                    wrap_to_pi(ph[(i - 1) * w + j - 1] - c) - wrap_to_pi(c - ph[(i + 1) * w + j + 1]);
                let d2 =
                    wrap_to_pi(ph[(i - 1) * w + j + 1] - c) - wrap_to_pi(c - ph[(i + 1) * w + j - 1]);
                let second = h2 * h2 + v2 * v2 + d1 * d1 + d2 * d2;
                rel[i * w + j] = 1.0 / second.max(1e-300);
            }
        }
    }
    let max_mod = modulus.iter().cloned().fold(0.0f64, f64::max);
    if max_mod > 0.0 {
        for s in 0..m {
            if modulus[s] < 1e-3 * max_mod {
                rel[s] *= 1e-12;
            }
        }
    }

    // 4-neighbor edges, highest summed endpoint reliability first (stable).
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(2 * m);
    for i in 0..h {
        for j in 0..w {
            let s = i * w + j;
            if j + 1 < w {
                edges.push((rel[s] + rel[s + 1], s as u32, (s + 1) as u32));
            }
            if i + 1 < h {
                edges.push((rel[s] + rel[s + w], s as u32, (s + w) as u32));
            }
        }
    }
    edges.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // Union-find with lazy offsets: value(p) = wrapped[p] + 2π·offset_to_root(p).
    let mut parent: Vec<u32> = (0..m as u32).collect();
    let mut rank = vec![0u8; m];
    let mut off = vec![0.0f64; m];
    fn find(p: usize, parent: &mut [u32], off: &mut [f64]) -> (usize, f64) {
        // Walk to the root, then compress the path with accumulated offsets.
        let mut path = Vec::new();
        let mut cur = p;
        while parent[cur] as usize != cur {
            path.push(cur);
            cur = parent[cur] as usize;
        }
        let root = cur;
        let mut acc = 0.0;
        for &node in path.iter().rev() {
            acc += off[node];
            parent[node] = root as u32;
            off[node] = acc;
        }
        (root, off[p] * if p == root { 0.0 } else { 1.0 })
    }
    for &(_, a, b) in &edges {
        let (a, b) = (a as usize, b as usize);
        let (ra, oa) = find(a, &mut parent, &mut off);
        let (rb, ob) = find(b, &mut parent, &mut off);
        if ra == rb {
            continue;
        }
        let va = ph[a] + TWO_PI * oa;
        let vb = ph[b] + TWO_PI * ob;
        let k = ((va - vb) / TWO_PI).round();
        if rank[ra] < rank[rb] {
            // Attach ra under rb: the whole ra region shifts by −k.
            parent[ra] = rb as u32;
            off[ra] = -k;
        } else {
            parent[rb] = ra as u32;
            off[rb] = k;
            if rank[ra] == rank[rb] {
                rank[ra] += 1;
            }
        }
    }
    let mut out = vec![0.0f64; m];
    for p in 0..m {
        let (_, o) = find(p, &mut parent, &mut off);
        out[p] = ph[p] + TWO_PI * o;
    }

    // Anchor: the most reliable pixel keeps its wrapped value.
    let mut anchor = 0usize;
    for s in 1..m {
        if rel[s] > rel[anchor] {
            anchor = s;
        }
    }
    let shift = TWO_PI * ((out[anchor] - ph[anchor]) / TWO_PI).round();
    for v in &mut out {
        *v -= shift;
    }
    Ok(PhaseGrid { grid_h: h, grid_w: w, values: out, wrapped: false })
}

/// Symmetric p×p one-minus-correlation distances, zero diagonal.
#[derive(Clone, Debug)]
pub struct DissimilarityMatrix {
    pub p: usize,
    values: Vec<f64>,
    /// Indices of zero-variance (uninformative) grids whose rows were set to 1.
    pub degenerate: Vec<usize>,
}

impl DissimilarityMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.p + b]
    }

    pub fn from_values(p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * p {
            return Err(PasfError::invalid("dissimilarity: wrong length"));
        }
        Ok(DissimilarityMatrix { p, values, degenerate: Vec::new() })
    }
}

/// 1 − Pearson correlation between every pair of unwrapped grids, each
/// treated as a length-m vector (unweighted over locations). A grid with
/// zero variance across locations gets distance 1 to everything and is
/// reported in `degenerate`.
pub fn phase_dissimilarity(grids: &[PhaseGrid]) -> Result<DissimilarityMatrix> {
    let p = grids.len();
    if p < 2 {
        return Err(PasfError::invalid("phase_dissimilarity: need ≥ 2 grids"));
    }
    let m = grids[0].values.len();
    if grids.iter().any(|g| g.values.len() != m) {
        return Err(PasfError::invalid("phase_dissimilarity: grids differ in size"));
    }
    // Center each grid once; cache norms.
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut norms = Vec::with_capacity(p);
    let mut degenerate = Vec::new();
    for (i, g) in grids.iter().enumerate() {
        let mean = g.values.iter().sum::<f64>() / m as f64;
        let c: Vec<f64> = g.values.iter().map(|v| v - mean).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            degenerate.push(i);
        }
        centered.push(c);
        norms.push(norm);
    }
    let mut values = vec![0.0f64; p * p];
    for a in 0..p {
        for b in (a + 1)..p {
            let d = if norms[a] == 0.0 || norms[b] == 0.0 {
                1.0
            } else {
                let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
                let rho = (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0);
                1.0 - rho
            };
            values[a * p + b] = d;
            values[b * p + a] = d;
        }
    }
    Ok(DissimilarityMatrix { p, values, degenerate })
}

/// One agglomerative merge: the two cluster ids joined and the height.
/// Leaves are 0..p−1; the merge at sorted position i creates cluster p+i.
#[derive(Clone, Copy, Debug)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Cluster labels plus the full merge record (heights non-decreasing).
#[derive(Clone, Debug)]
pub struct ClusterModel {
    /// Entry → cluster id 1..K.
    pub labels: Vec<usize>,
    pub merges: Vec<Merge>,
    pub k: usize,
    /// The K the automatic rule would pick (equals `k` when auto was used).
    pub k_auto: usize,
}

/// Requested cluster count for [`ward_cluster`].
#[derive(Clone, Copy, Debug)]
pub enum ClusterCount {
    Auto,
    Fixed(usize),
}

/// Agglomerative clustering under the Ward criterion (Lance–Williams on
/// squared dissimilarities; recorded heights are square roots of the merged
/// squared distance). K=auto maximizes the ratio of consecutive merge
/// heights over the last min(10, p−1) merges, with heights clamped up to 5%
/// of the final height so near-zero early merges cannot fabricate ratios.
pub fn ward_cluster(d: &DissimilarityMatrix, count: ClusterCount) -> Result<ClusterModel> {
    let p = d.p;
    if p < 2 {
        return Ok(ClusterModel { labels: vec![1; p], merges: Vec::new(), k: 1, k_auto: 1 });
    }
    if let ClusterCount::Fixed(k) = count {
        if k == 0 || k > p {
            return Err(PasfError::invalid(format!("ward_cluster: K={k} out of range 1..{p}")));
        }
    }

    let merges = nn_chain_ward(d);
    let heights: Vec<f64> = merges.iter().map(|m| m.height).collect();
    let k_auto = auto_k(&heights, p);
    let k = match count {
        ClusterCount::Auto => k_auto,
        ClusterCount::Fixed(k) => k,
    };
    let labels = cut_labels(&merges, p, k);
    Ok(ClusterModel { labels, merges, k, k_auto })
}

/// NN-chain agglomeration; returns merges sorted ascending by height with
/// scipy-style cluster ids (new cluster at sorted step i gets id p+i).
fn nn_chain_ward(d: &DissimilarityMatrix) -> Vec<Merge> {
    let p = d.p;
    // Working matrix of squared dissimilarities between active clusters;
    // slot i always contains original leaf i.
    let mut dist2 = vec![0.0f64; p * p];
    for a in 0..p {
        for b in 0..p {
            let v = d.get(a, b);
            dist2[a * p + b] = v * v;
        }
    }
    let mut size = vec![1usize; p];
    let mut active = vec![true; p];
    // Raw merges as (leaf-in-A, leaf-in-B, height): slot indices are leaves.
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(p - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(p);

    for _ in 0..p - 1 {
        if chain.is_empty() {
            let start = (0..p).find(|&i| active[i]).unwrap();
            chain.push(start);
        }
        loop {
            let a = *chain.last().unwrap();
            // Nearest active neighbor; prefer the previous chain element on
            // ties so reciprocal pairs terminate, then lowest index.
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            if let Some(b) = prev {
                best = b;
                best_d = dist2[a * p + b];
            }
            for b in 0..p {
                if !active[b] || b == a || Some(b) == prev {
                    continue;
                }
                let v = dist2[a * p + b];
                if v < best_d {
                    best_d = v;
                    best = b;
                }
            }
            if Some(best) == prev {
                // Reciprocal nearest neighbors: merge a and best.
                let b = best;
                chain.pop();
                chain.pop();
                let h = best_d.max(0.0).sqrt();
                let (keep, drop) = (a.min(b), a.max(b));
                raw.push((keep, drop, h));
                // Lance–Williams (Ward) update on squared distances.
                let (sa, sb) = (size[a], size[b]);
                let st = sa + sb;
                for x in 0..p {
                    if !active[x] || x == a || x == b {
                        continue;
                    }
                    let sx = size[x];
                    let upd = ((sa + sx) as f64 * dist2[a * p + x]
                        + (sb + sx) as f64 * dist2[b * p + x]
                        - sx as f64 * dist2[a * p + b])
                        / (st + sx) as f64;
                    dist2[keep * p + x] = upd;
                    dist2[x * p + keep] = upd;
                }
                size[keep] = st;
                active[drop] = false;
                break;
            }
            chain.push(best);
        }
    }

    // Sort by height (stable: ties keep generation order) and assign ids.
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| raw[i].2.partial_cmp(&raw[j].2).unwrap());
    let mut uf: Vec<usize> = (0..p).collect();
    fn find_root(uf: &mut Vec<usize>, mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut cluster_id: Vec<usize> = (0..p).collect();
    let mut cluster_size: Vec<usize> = vec![1; p];
    let mut merges = Vec::with_capacity(raw.len());
    for (step, &ri) in order.iter().enumerate() {
        let (a, b, h) = raw[ri];
        let ra = find_root(&mut uf, a);
        let rb = find_root(&mut uf, b);
        let (ida, idb) = (cluster_id[ra], cluster_id[rb]);
        let sz = cluster_size[ra] + cluster_size[rb];
        merges.push(Merge { left: ida.min(idb), right: ida.max(idb), height: h, size: sz });
        uf[ra] = rb;
        cluster_id[rb] = p + step;
        cluster_size[rb] = sz;
    }
    merges
}

/// Labels 1..K from cutting the sorted merge record at K clusters; cluster
/// ids are assigned by first appearance in leaf order.
fn cut_labels(merges: &[Merge], p: usize, k: usize) -> Vec<usize> {
    let apply = p.saturating_sub(k).min(merges.len());
    let mut uf: Vec<usize> = (0..p).collect();
    fn find_root(uf: &mut Vec<usize>, mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    // Replay merges over leaves: map cluster id → a representative leaf.
    let mut rep: Vec<usize> = (0..p + merges.len()).map(|i| if i < p { i } else { usize::MAX }).collect();
    for (step, m) in merges.iter().enumerate().take(apply) {
        let (la, lb) = (rep[m.left], rep[m.right]);
        let (ra, rb) = (find_root(&mut uf, la), find_root(&mut uf, lb));
        uf[ra] = rb;
        rep[p + step] = lb;
    }
    // Record representatives for uncut merges too so ids stay resolvable.
    for (step, m) in merges.iter().enumerate().skip(apply) {
        rep[p + step] = rep[m.left];
    }
    let mut labels = vec![0usize; p];
    let mut next = 0usize;
    let mut root_label: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for leaf in 0..p {
        let r = find_root(&mut uf, leaf);
        let id = *root_label.entry(r).or_insert_with(|| {
            next += 1;
            next
        });
        labels[leaf] = id;
    }
    labels
}

/// K=auto: best consecutive-height ratio over the last min(10, p−1) merges,
/// heights clamped below 5% of the final height. Fewer than two merges in
/// range (or an all-zero dendrogram) give K=1.
fn auto_k(heights: &[f64], p: usize) -> usize {
    if heights.len() < 2 {
        return 1;
    }
    let last = heights[heights.len() - 1];
    if last <= 0.0 {
        return 1;
    }
    let floor = 0.05 * last;
    let w = 10.min(p - 1);
    let lo = heights.len().saturating_sub(w);
    let mut best_i = None;
    let mut best_r = f64::NEG_INFINITY;
    for i in lo..heights.len() - 1 {
        let a = heights[i].max(floor);
        let b = heights[i + 1].max(floor);
        let r = b / a;
        if r > best_r {
            best_r = r;
            best_i = Some(i);
        }
    }
    match best_i {
        Some(i) => p - 1 - i,
        None => 1,
    }
}

/// Result of the phase-vs-frequency linearity regression.
#[derive(Clone, Copy, Debug)]
pub struct PhaseLinearity {
    /// Coefficient of determination of the best through-origin fit.
    pub r2: f64,
    /// Location whose reference-differenced phases were regressed.
    pub location: usize,
    /// Reference location (largest mean modulus).
    pub reference: usize,
    pub slope: f64,
}

/// Candidate locations must carry at least this share of the reference's
/// mean modulus — phases are meaningless where a component has no energy.
const LINEARITY_MODULUS_GATE: f64 = 0.5;

/// Regress reference-differenced unwrapped phases against frequency through
/// the origin and report the best R² over well-excited locations.
///
/// Inputs are parallel arrays over entries: the regressor `freqs[e]`, the
/// unwrapped phase map, and the modulus map. Differencing each entry's phase
/// at the test location against the same entry's phase at the reference
/// location removes the entry-specific phase offset, leaving the pure
/// propagation-delay term; a traveling or rotating structure then gives a
/// line through the origin.
pub fn phase_linearity(
    freqs: &[f64],
    unwrapped: &[Vec<f64>],
    moduli: &[Vec<f64>],
) -> Result<PhaseLinearity> {
    let p = freqs.len();
    if p < 2 || unwrapped.len() != p || moduli.len() != p {
        return Err(PasfError::invalid(
            "phase_linearity: need ≥ 2 entries with matching freqs/phases/moduli",
        ));
    }
    let m = unwrapped[0].len();
    if m < 2 || unwrapped.iter().any(|g| g.len() != m) || moduli.iter().any(|g| g.len() != m) {
        return Err(PasfError::invalid("phase_linearity: inconsistent grid sizes"));
    }
    let mut mean_mod = vec![0.0f64; m];
    for g in moduli {
        for (acc, v) in mean_mod.iter_mut().zip(g) {
            *acc += v;
        }
    }
    for v in &mut mean_mod {
        *v /= p as f64;
    }
    let mut reference = 0usize;
    for s in 1..m {
        if mean_mod[s] > mean_mod[reference] {
            reference = s;
        }
    }
    let gate = LINEARITY_MODULUS_GATE * mean_mod[reference];
    let ww: f64 = freqs.iter().map(|w| w * w).sum();
    if ww == 0.0 {
        return Err(PasfError::invalid("phase_linearity: all frequencies zero"));
    }
    let mut best: Option<PhaseLinearity> = None;
    for s in 0..m {
        if s == reference || mean_mod[s] < gate {
            continue;
        }
        let y: Vec<f64> = (0..p).map(|e| unwrapped[e][s] - unwrapped[e][reference]).collect();
        let slope = freqs.iter().zip(&y).map(|(w, yy)| w * yy).sum::<f64>() / ww;
        let rss: f64 = freqs.iter().zip(&y).map(|(w, yy)| (yy - slope * w).powi(2)).sum();
        let mean_y = y.iter().sum::<f64>() / p as f64;
        let tss: f64 = y.iter().map(|yy| (yy - mean_y).powi(2)).sum();
        let r2 = if tss > 0.0 { 1.0 - rss / tss } else if rss <= 1e-24 { 1.0 } else { 0.0 };
        if best.map_or(true, |b| r2 > b.r2) {
            best = Some(PhaseLinearity { r2, location: s, reference, slope });
        }
    }
    best.ok_or_else(|| PasfError::invalid("phase_linearity: no location passes the modulus gate"))
}
