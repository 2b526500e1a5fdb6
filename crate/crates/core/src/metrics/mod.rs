//! Network indices of one weighted directed adjacency, complete-linkage
//! clustering of index vectors, and per-edge distance and bearing
//! statistics.
//!
//! Absent and zero-weight edges are both treated as missing links.

mod appendix;
mod cluster;
mod io;
mod powerlaw;

pub use appendix::{
    bearing_histogram, distance_by_category, edge_quantile_categories, five_number_summary,
    sector_start_deg, CategoryDistances, FiveNumber, QuantileBins,
};
pub use cluster::{hclust_complete, hclust_points, Dendrogram, Merge};
pub use io::{read_indices, write_indices, INDEX_COLUMNS};
pub use powerlaw::{fit_power_law, scale_free_alpha, PowerLawFit, StrengthMode};

use crate::network::WindowedAdjacency;
use crate::numeric::compensated_sum;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least {need} nodes, got {got}")]
    TooFewNodes { need: usize, got: usize },
    #[error("network has no edges")]
    NoEdges,
    #[error("network has no connected triplets")]
    NoTriplets,
    #[error("power-law fit needs a tail of at least 10 positive strengths that are not all equal ({0} positive)")]
    InsufficientDegrees(usize),
    #[error("in- or out-strength has zero variance")]
    ZeroVariance,
    #[error("null model is degenerate: {0}")]
    DegenerateNull(String),
    #[error("index vectors have no complete dimension")]
    IncompleteVectors,
    #[error("need at least {need} positive edges, got {got}")]
    TooFewEdges { need: usize, got: usize },
    #[error("node {0} is not in the partition")]
    UnknownNode(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Edge cost used by shortest paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// cost = 1 / weight; strong links are short.
    #[default]
    Reciprocal,
    /// cost = weight.
    Direct,
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostMode::Reciprocal => "reciprocal",
            CostMode::Direct => "direct",
        })
    }
}

impl FromStr for CostMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reciprocal" => Ok(CostMode::Reciprocal),
            "direct" => Ok(CostMode::Direct),
            _ => Err(format!("unknown cost mode {s:?} (expected reciprocal or direct)")),
        }
    }
}

fn need_nodes(w: &WindowedAdjacency, need: usize) -> Result<()> {
    if w.len() < need {
        return Err(MetricsError::TooFewNodes { need, got: w.len() });
    }
    Ok(())
}

/// Sum of weights over the `N(N−1)` possible edges.
pub fn density(w: &WindowedAdjacency) -> Result<f64> {
    need_nodes(w, 2)?;
    let n = w.len() as f64;
    Ok(compensated_sum(w.positive_edges().map(|e| e.2)) / (n * (n - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortestPaths {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub diameter: f64,
    pub reachable_pairs: usize,
    pub unreachable_pairs: usize,
}

/// All-pairs shortest path costs; `None` where unreachable or on the
/// diagonal.
pub fn distance_matrix(w: &WindowedAdjacency, mode: CostMode) -> Vec<Vec<Option<f64>>> {
    let n = w.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, v) in w.positive_edges() {
        let cost = match mode {
            CostMode::Reciprocal => 1.0 / v,
            CostMode::Direct => v,
        };
        adj[i].push((j, cost));
    }
    (0..n)
        .into_par_iter()
        .map(|src| {
            let mut dist = dijkstra(&adj, src);
            dist[src] = None;
            dist
        })
        .collect()
}

/// Dense-scan Dijkstra; O(N²) per source and free of heap tie effects.
fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> Vec<Option<f64>> {
    let n = adj.len();
    let mut dist: Vec<Option<f64>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = Some(0.0);
    loop {
        let next = (0..n)
            .filter(|&k| !done[k])
            .filter_map(|k| dist[k].map(|d| (k, d)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((u, du)) = next else { break };
        done[u] = true;
        for &(v, c) in &adj[u] {
            let cand = du + c;
            if dist[v].is_none_or(|d| cand < d) {
                dist[v] = Some(cand);
            }
        }
    }
    dist
}

/// Mean, population sd and maximum of shortest-path costs over reachable
/// ordered pairs; unreachable pairs are excluded and counted.
pub fn shortest_paths(w: &WindowedAdjacency, mode: CostMode) -> Result<ShortestPaths> {
    need_nodes(w, 2)?;
    if w.positive_edges().next().is_none() {
        return Err(MetricsError::NoEdges);
    }
    let n = w.len();
    let d: Vec<f64> = distance_matrix(w, mode).into_iter().flatten().flatten().collect();
    let k = d.len() as f64;
    let mean = compensated_sum(d.iter().copied()) / k;
    let var = compensated_sum(d.iter().map(|x| (x - mean) * (x - mean))) / k;
    Ok(ShortestPaths {
        mean,
        sd: var.sqrt(),
        diameter: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        reachable_pairs: d.len(),
        unreachable_pairs: n * (n - 1) - d.len(),
    })
}

/// Symmetrized weights `max(w_ij, w_ji)`.
pub fn symmetrized(w: &WindowedAdjacency) -> Vec<Vec<f64>> {
    let n = w.len();
    (0..n)
        .map(|i| (0..n).map(|j| w.weight(i, j).max(w.weight(j, i))).collect())
        .collect()
}

/// Weighted global clustering on the symmetrized matrix: the total value
/// of closed triplets over the total value of all triplets, a triplet
/// centred on `i` with ends `j`, `k` having value `(s_ij + s_ik) / 2`.
pub fn transitivity(w: &WindowedAdjacency) -> Result<f64> {
    need_nodes(w, 3)?;
    let s = symmetrized(w);
    let n = w.len();
    let (closed, total): (Vec<f64>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb: Vec<usize> = (0..n).filter(|&j| s[i][j] > 0.0).collect();
            let mut closed = Vec::new();
            let mut total = Vec::new();
            for (a, &j) in nb.iter().enumerate() {
                for &k in &nb[a + 1..] {
                    let v = (s[i][j] + s[i][k]) / 2.0;
                    total.push(v);
                    if s[j][k] > 0.0 {
                        closed.push(v);
                    }
                }
            }
            (compensated_sum(closed), compensated_sum(total))
        })
        .unzip();
    let total = compensated_sum(total);
    if total == 0.0 {
        return Err(MetricsError::NoTriplets);
    }
    Ok((compensated_sum(closed) / total).min(1.0))
}

/// Pearson correlation of in- and out-strength. Identical strength vectors
/// give exactly 1, even when constant.
pub fn degree_correlation(w: &WindowedAdjacency) -> Result<f64> {
    need_nodes(w, 3)?;
    let n = w.len();
    let out_s: Vec<f64> = (0..n)
        .map(|i| compensated_sum((0..n).map(|j| w.weight(i, j))))
        .collect();
    let in_s: Vec<f64> = (0..n)
        .map(|j| compensated_sum((0..n).map(|i| w.weight(i, j))))
        .collect();
    if in_s == out_s {
        return Ok(1.0);
    }
    pearson(&in_s, &out_s).ok_or(MetricsError::ZeroVariance)
}

/// Two-pass Pearson correlation; `None` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullConfig {
    pub n_null: usize,
    pub seed: u64,
}

impl Default for NullConfig {
    fn default() -> Self {
        NullConfig { n_null: 20, seed: 0 }
    }
}

/// Random graph with the node count and edge count of `w`: edges placed
/// uniformly over ordered pairs, carrying a permutation of the observed
/// positive weights. Replicate `r` uses stream `r` of the seeded generator.
pub fn null_graph(w: &WindowedAdjacency, seed: u64, replicate: u64) -> WindowedAdjacency {
    let n = w.len();
    let mut weights: Vec<f64> = w.positive_edges().map(|e| e.2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    let slots = index::sample(&mut rng, n * (n - 1), weights.len());
    weights.shuffle(&mut rng);
    let mut g = WindowedAdjacency::empty(
        format!("{}#null{replicate}", w.window_id),
        w.node_ids.clone(),
        w.direction,
        w.measure.clone(),
    );
    for (slot, v) in slots.iter().zip(weights) {
        let i = slot / (n - 1);
        let jj = slot % (n - 1);
        let j = if jj < i { jj } else { jj + 1 };
        g.set(i, j, Some(v));
    }
    g
}

/// `(C / C_null) / (L / L_null)` with null means over `cfg.n_null`
/// replicates.
pub fn small_worldness(w: &WindowedAdjacency, mode: CostMode, cfg: &NullConfig) -> Result<f64> {
    need_nodes(w, 3)?;
    if cfg.n_null == 0 {
        return Err(MetricsError::InvalidArgument("n_null must be >= 1".into()));
    }
    let m = w.positive_edges().count();
    if m == 0 {
        return Err(MetricsError::NoEdges);
    }
    let n = w.len();
    if m == n * (n - 1) {
        return Err(MetricsError::DegenerateNull(
            "complete graph: every null replicate has the same topology".into(),
        ));
    }
    let nulls: Vec<WindowedAdjacency> = (0..cfg.n_null as u64)
        .into_par_iter()
        .map(|r| null_graph(w, cfg.seed, r))
        .collect();
    small_worldness_with_nulls(w, mode, &nulls)
}

/// Small-worldness against explicitly supplied null graphs.
pub fn small_worldness_with_nulls(
    w: &WindowedAdjacency,
    mode: CostMode,
    nulls: &[WindowedAdjacency],
) -> Result<f64> {
    if nulls.is_empty() {
        return Err(MetricsError::InvalidArgument("no null graphs".into()));
    }
    let c = transitivity(w)?;
    let l = shortest_paths(w, mode)?.mean;
    let stats = nulls
        .par_iter()
        .map(|g| Ok((transitivity(g)?, shortest_paths(g, mode)?.mean)))
        .collect::<Result<Vec<_>>>()?;
    let k = stats.len() as f64;
    let c_null = compensated_sum(stats.iter().map(|s| s.0)) / k;
    let l_null = compensated_sum(stats.iter().map(|s| s.1)) / k;
    if c_null == 0.0 {
        return Err(MetricsError::DegenerateNull("null transitivity is 0".into()));
    }
    if l == 0.0 {
        return Err(MetricsError::DegenerateNull("mean path cost is 0".into()));
    }
    Ok((c / c_null) / (l / l_null))
}

/// The eight indices of one window plus provenance. Indices that cannot be
/// computed are `None`, with the reason in `errors`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexVector {
    pub window_id: String,
    pub diameter: Option<f64>,
    pub density: Option<f64>,
    pub transitivity: Option<f64>,
    pub sp_mean: Option<f64>,
    pub sp_sd: Option<f64>,
    pub small_worldness: Option<f64>,
    pub scale_free_alpha: Option<f64>,
    pub degree_correlation: Option<f64>,
    pub cost_mode: CostMode,
    pub null_seed: u64,
    pub n_null: usize,
    pub unreachable_pairs: Option<usize>,
    pub errors: Vec<(&'static str, MetricsError)>,
}

impl IndexVector {
    /// Indices in table order: diam, dens, trans, sp_mean, sp_sd, sw,
    /// sf_alpha, dc.
    pub fn features(&self) -> [Option<f64>; 8] {
        [
            self.diameter,
            self.density,
            self.transitivity,
            self.sp_mean,
            self.sp_sd,
            self.small_worldness,
            self.scale_free_alpha,
            self.degree_correlation,
        ]
    }
}

pub fn index_vector(w: &WindowedAdjacency, mode: CostMode, null: &NullConfig) -> IndexVector {
    let mut v = IndexVector {
        window_id: w.window_id.clone(),
        diameter: None,
        density: None,
        transitivity: None,
        sp_mean: None,
        sp_sd: None,
        small_worldness: None,
        scale_free_alpha: None,
        degree_correlation: None,
        cost_mode: mode,
        null_seed: null.seed,
        n_null: null.n_null,
        unreachable_pairs: None,
        errors: Vec::new(),
    };
    if w.positive_edges().next().is_none() {
        v.errors.push(("all", MetricsError::NoEdges));
        return v;
    }
    let mut keep = |name: &'static str, r: Result<f64>| match r {
        Ok(x) => Some(x),
        Err(e) => {
            log::warn!("window {}: {name}: {e}", w.window_id);
            v.errors.push((name, e));
            None
        }
    };
    let dens = keep("dens", density(w));
    let sp = shortest_paths(w, mode);
    let diam = keep("diam", sp.clone().map(|s| s.diameter));
    let sp_mean = keep("sp_mean", sp.clone().map(|s| s.mean));
    let sp_sd = keep("sp_sd", sp.clone().map(|s| s.sd));
    let trans = keep("trans", transitivity(w));
    let sw = keep("sw", small_worldness(w, mode, null));
    let sf = keep("sf_alpha", scale_free_alpha(w, StrengthMode::Total).map(|f| f.alpha));
    let dc = keep("dc", degree_correlation(w));
    v.density = dens;
    v.diameter = diam;
    v.sp_mean = sp_mean;
    v.sp_sd = sp_sd;
    v.transitivity = trans;
    v.small_worldness = sw;
    v.scale_free_alpha = sf;
    v.degree_correlation = dc;
    v.unreachable_pairs = sp.ok().map(|s| s.unreachable_pairs);
    v
}
