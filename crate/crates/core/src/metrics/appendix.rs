use super::{MetricsError, Result};
use crate::geometry::{haversine_km, initial_bearing_deg, Partition};
use crate::network::WindowedAdjacency;
use std::collections::BTreeMap;

/// Quantile classes of positive edge weights; class 0 holds the weakest.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBins {
    pub n_bins: usize,
    /// The `n_bins − 1` interior cut points.
    pub cuts: Vec<f64>,
    /// `(row, col) → class`.
    pub categories: BTreeMap<(usize, usize), usize>,
    /// Set when all weights are equal and everything sits in class 0.
    pub degenerate: bool,
}

/// Splits positive edges into `n_bins` classes at the empirical
/// `k / n_bins` quantiles (inverse-CDF definition). A weight equal to a cut
/// point falls in the lower class.
pub fn edge_quantile_categories(w: &WindowedAdjacency, n_bins: usize) -> Result<QuantileBins> {
    if n_bins == 0 {
        return Err(MetricsError::InvalidArgument("n_bins must be >= 1".into()));
    }
    let edges: Vec<(usize, usize, f64)> = w.positive_edges().collect();
    if edges.len() < n_bins {
        return Err(MetricsError::TooFewEdges { need: n_bins, got: edges.len() });
    }
    let mut sorted: Vec<f64> = edges.iter().map(|e| e.2).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts: Vec<f64> = (1..n_bins)
        .map(|k| sorted[(k * n).div_ceil(n_bins) - 1])
        .collect();
    let degenerate = sorted[0] == sorted[n - 1];
    if degenerate {
        log::warn!("window {}: all edge weights equal, one class", w.window_id);
    }
    let categories = edges
        .iter()
        .map(|&(i, j, v)| {
            let class = if degenerate {
                0
            } else {
                cuts.partition_point(|&c| c < v)
            };
            ((i, j), class)
        })
        .collect();
    Ok(QuantileBins { n_bins, cuts, categories, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Min, quartiles (linear interpolation between order statistics) and max.
pub fn five_number_summary(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(FiveNumber {
        min: v[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistances {
    pub category: usize,
    /// Centroid-to-centroid distances (km) in edge order.
    pub distances: Vec<f64>,
    pub summary: Option<FiveNumber>,
}

fn node_regions(w: &WindowedAdjacency, partition: &Partition) -> Result<Vec<usize>> {
    w.node_ids
        .iter()
        .map(|id| {
            partition
                .index_of(id)
                .ok_or_else(|| MetricsError::UnknownNode(id.clone()))
        })
        .collect()
}

/// Haversine distance between source and destination centroids of every
/// categorised edge, grouped by class.
pub fn distance_by_category(
    w: &WindowedAdjacency,
    partition: &Partition,
    bins: &QuantileBins,
) -> Result<Vec<CategoryDistances>> {
    let idx = node_regions(w, partition)?;
    let regions = partition.regions();
    let mut groups = vec![Vec::new(); bins.n_bins];
    for (&(i, j), &c) in &bins.categories {
        let d = haversine_km(&regions[idx[i]].centroid(), &regions[idx[j]].centroid());
        groups[c].push(d);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(category, distances)| CategoryDistances {
            category,
            summary: five_number_summary(&distances),
            distances,
        })
        .collect())
}

/// Per-class counts of initial bearings (source centroid to destination
/// centroid) in `n_sectors` equal sectors, sector 0 centred on north.
pub fn bearing_histogram(
    w: &WindowedAdjacency,
    partition: &Partition,
    bins: &QuantileBins,
    n_sectors: usize,
) -> Result<Vec<Vec<usize>>> {
    if n_sectors == 0 {
        return Err(MetricsError::InvalidArgument("n_sectors must be >= 1".into()));
    }
    let idx = node_regions(w, partition)?;
    let regions = partition.regions();
    let width = 360.0 / n_sectors as f64;
    let mut hist = vec![vec![0usize; n_sectors]; bins.n_bins];
    for (&(i, j), &c) in &bins.categories {
        let (a, b) = (regions[idx[i]].centroid(), regions[idx[j]].centroid());
        let Ok(bearing) = initial_bearing_deg(&a, &b) else {
            log::warn!("edge {}->{}: coincident centroids, no bearing", w.node_ids[i], w.node_ids[j]);
            continue;
        };
        hist[c][sector_of(bearing, width, n_sectors)] += 1;
    }
    Ok(hist)
}

pub(crate) fn sector_of(bearing: f64, width: f64, n_sectors: usize) -> usize {
    ((bearing + width / 2.0) / width).floor() as usize % n_sectors
}

/// Start angle of sector `k` in `[0, 360)`.
pub fn sector_start_deg(k: usize, n_sectors: usize) -> f64 {
    let width = 360.0 / n_sectors as f64;
    (k as f64 * width - width / 2.0).rem_euclid(360.0)
}
