//! Windowed adjacency matrices built from integrated connectivity
//! estimates, and their edge-list serialization.

mod io;

pub use io::{read_edges, read_edges_path, write_dense, write_edges, write_edges_path, WriteError};

use crate::connectivity::{scale_sum, ConnectivityError, EstimatorConfig, PointwiseMeasure};
use crate::geometry::{BBox, Partition};
use crate::numeric::sorted_sum;
use crate::trajectory::{window_corpus, TemporalContext, TrajectoryCorpus, TrajectorySegment};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("trajectory {0}: receptor region cannot be resolved")]
    UnresolvedReceptor(String),
    #[error("edge file header: {0}")]
    FormatVersionMismatch(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("region id {0:?} cannot be written to an edge file")]
    InvalidId(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Connectivity(#[from] ConnectivityError),
}

pub type Result<T, E = NetworkError> = std::result::Result<T, E>;

/// Orientation of stored edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeDirection {
    /// Row = sampling (receptor) region, column = the region it connects to.
    Sampling,
    /// Row = upwind source, column = downwind receptor.
    #[default]
    Transport,
}

impl fmt::Display for EdgeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeDirection::Sampling => "sampling",
            EdgeDirection::Transport => "transport",
        })
    }
}

impl FromStr for EdgeDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sampling" => Ok(EdgeDirection::Sampling),
            "transport" => Ok(EdgeDirection::Transport),
            _ => Err(format!("unknown edge direction {s:?} (expected sampling or transport)")),
        }
    }
}

/// How `|B|` is set per receptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BAreaMode {
    #[default]
    Unit,
    /// Region area in km².
    #[serde(alias = "km2")]
    Real,
}

impl fmt::Display for BAreaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BAreaMode::Unit => "unit",
            BAreaMode::Real => "km2",
        })
    }
}

impl FromStr for BAreaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit" => Ok(BAreaMode::Unit),
            "real" | "km2" => Ok(BAreaMode::Real),
            _ => Err(format!("unknown b-area mode {s:?} (expected unit or real)")),
        }
    }
}

/// One window's N×N weights; `None` marks an unobserved edge (no samples
/// in the receptor). The diagonal is always `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedAdjacency {
    pub window_id: String,
    pub node_ids: Arc<[String]>,
    weights: Vec<Option<f64>>,
    pub direction: EdgeDirection,
    pub measure: String,
}

impl WindowedAdjacency {
    pub fn empty(
        window_id: impl Into<String>,
        node_ids: Arc<[String]>,
        direction: EdgeDirection,
        measure: impl Into<String>,
    ) -> WindowedAdjacency {
        let n = node_ids.len();
        WindowedAdjacency {
            window_id: window_id.into(),
            node_ids,
            weights: vec![None; n * n],
            direction,
            measure: measure.into(),
        }
    }

    /// Builds from a dense matrix; `0` off the diagonal is a present edge.
    pub fn from_dense(window_id: &str, node_ids: &[&str], m: &[Vec<f64>]) -> WindowedAdjacency {
        let ids: Arc<[String]> = node_ids.iter().map(|s| s.to_string()).collect();
        let mut w = WindowedAdjacency::empty(window_id, ids, EdgeDirection::Transport, "dense");
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i != j {
                    w.set(i, j, Some(v));
                }
            }
        }
        w
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.weights[i * self.len() + j]
    }

    /// Weight with absent edges read as 0.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).unwrap_or(0.0)
    }

    /// # Panics
    /// On a diagonal entry or a negative or non-finite weight.
    pub fn set(&mut self, i: usize, j: usize, w: Option<f64>) {
        assert!(i != j || w.is_none(), "diagonal must stay empty");
        if let Some(v) = w {
            assert!(v >= 0.0 && v.is_finite(), "invalid weight {v}");
        }
        let n = self.len();
        self.weights[i * n + j] = w;
    }

    /// Present off-diagonal entries as `(row, col, weight)`, row-major.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        self.weights
            .iter()
            .enumerate()
            .filter_map(move |(k, w)| w.map(|w| (k / n, k % n, w)))
    }

    /// Edges with strictly positive weight.
    pub fn positive_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges().filter(|e| e.2 > 0.0)
    }

    /// Dense weights with absent edges as 0.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.weight(i, j)).collect())
            .collect()
    }

    pub fn transposed(&self) -> WindowedAdjacency {
        let mut t = self.clone();
        for i in 0..self.len() {
            for j in 0..self.len() {
                t.weights[j * self.len() + i] = self.get(i, j);
            }
        }
        t
    }

    /// The same weights stored in the other orientation.
    pub fn with_direction(&self, direction: EdgeDirection, delta_seconds: i64) -> WindowedAdjacency {
        if direction == self.direction {
            return self.clone();
        }
        let mut out = if delta_seconds < 0 {
            self.transposed()
        } else {
            self.clone()
        };
        out.direction = direction;
        out
    }

    pub fn scaled(&self, c: f64) -> WindowedAdjacency {
        let mut out = self.clone();
        for w in out.weights.iter_mut().flatten() {
            *w *= c;
        }
        out
    }
}

/// Windows sharing one node order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSequence {
    pub node_ids: Arc<[String]>,
    pub windows: Vec<WindowedAdjacency>,
    pub direction: EdgeDirection,
    pub measure: String,
    pub b_area: BAreaMode,
    /// Run-config fingerprint carried into output headers.
    pub config_fingerprint: Option<String>,
}

impl NetworkSequence {
    pub fn window(&self, id: &str) -> Option<&WindowedAdjacency> {
        self.windows.iter().find(|w| w.window_id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub measure: PointwiseMeasure,
    pub t_length: f64,
    pub b_area: BAreaMode,
    pub context: TemporalContext,
    pub direction: EdgeDirection,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            measure: PointwiseMeasure::Contact,
            t_length: 1.0,
            b_area: BAreaMode::Unit,
            context: TemporalContext::Whole,
            direction: EdgeDirection::Transport,
        }
    }
}

/// Partition index of each segment's receptor: the explicit receptor id,
/// else the region containing the origin (lowest id on shared boundaries).
pub fn resolve_receptors(corpus: &TrajectoryCorpus, partition: &Partition) -> Result<Vec<usize>> {
    corpus
        .segments
        .iter()
        .map(|s| resolve_one(s, partition))
        .collect()
}

fn resolve_one(s: &TrajectorySegment, partition: &Partition) -> Result<usize> {
    if let Some(id) = &s.receptor_region {
        return partition
            .index_of(id)
            .ok_or_else(|| NetworkError::UnresolvedReceptor(s.traj_id.clone()));
    }
    let hits = partition.locate_all(&s.origin);
    if hits.len() > 1 {
        log::info!(
            "trajectory {}: origin on a shared boundary, using region {}",
            s.traj_id,
            partition.regions()[hits[0]].id()
        );
    }
    hits.first()
        .copied()
        .ok_or_else(|| NetworkError::UnresolvedReceptor(s.traj_id.clone()))
}

fn segment_bbox(s: &TrajectorySegment) -> BBox {
    let pts: Vec<[f64; 2]> = s.fixes.iter().map(|f| [f.point.lon, f.point.lat]).collect();
    BBox::from_points(&pts).expect("segments have at least one fix")
}

/// One adjacency per window of `cfg.context`.
pub fn build_networks(
    corpus: &TrajectoryCorpus,
    partition: &Partition,
    cfg: &NetworkConfig,
) -> Result<NetworkSequence> {
    cfg.measure.validate(&corpus.covariate_names)?;
    EstimatorConfig { t_length: cfg.t_length, b_area: 1.0 }.validate()?;
    resolve_receptors(corpus, partition)?;
    let node_ids: Arc<[String]> = partition.regions().iter().map(|r| r.id().to_string()).collect();
    let windows = window_corpus(corpus, cfg.context)
        .into_iter()
        .map(|(id, c)| build_window(&id, &c, partition, cfg, &node_ids))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkSequence {
        node_ids,
        windows,
        direction: cfg.direction,
        measure: cfg.measure.to_string(),
        b_area: cfg.b_area,
        config_fingerprint: None,
    })
}

fn build_window(
    window_id: &str,
    corpus: &TrajectoryCorpus,
    partition: &Partition,
    cfg: &NetworkConfig,
    node_ids: &Arc<[String]>,
) -> Result<WindowedAdjacency> {
    let n = partition.len();
    let receptors = resolve_receptors(corpus, partition)?;
    let mut by_receptor: Vec<Vec<&TrajectorySegment>> = vec![Vec::new(); n];
    for (s, &r) in corpus.segments.iter().zip(&receptors) {
        by_receptor[r].push(s);
    }
    let rows = by_receptor
        .par_iter()
        .enumerate()
        .map(|(i, segs)| receptor_row(i, segs, partition, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut w = WindowedAdjacency::empty(
        window_id,
        node_ids.clone(),
        EdgeDirection::Sampling,
        cfg.measure.to_string(),
    );
    for (i, row) in rows.into_iter().enumerate() {
        if let Some(row) = row {
            for (j, v) in row.into_iter().enumerate() {
                if i != j {
                    w.set(i, j, Some(v));
                }
            }
        }
    }
    Ok(w.with_direction(cfg.direction, corpus.delta_seconds))
}

/// Estimates for receptor `i` against every source; `None` without samples.
fn receptor_row(
    i: usize,
    segs: &[&TrajectorySegment],
    partition: &Partition,
    cfg: &NetworkConfig,
) -> Result<Option<Vec<f64>>> {
    if segs.is_empty() {
        return Ok(None);
    }
    let regions = partition.regions();
    let est = EstimatorConfig {
        t_length: cfg.t_length,
        b_area: match cfg.b_area {
            BAreaMode::Unit => 1.0,
            BAreaMode::Real => regions[i].area_km2(),
        },
    };
    // Regions outside a segment's bounding box score 0 for every measure,
    // so only the candidates are evaluated.
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); regions.len()];
    for s in segs {
        let bbox = segment_bbox(s);
        for j in partition.candidates(&bbox) {
            if j != i {
                let v = cfg.measure.evaluate(s, &regions[j])?;
                if v != 0.0 {
                    values[j].push(v);
                }
            }
        }
    }
    Ok(Some(
        values
            .into_iter()
            .map(|v| scale_sum(sorted_sum(v), segs.len(), &est))
            .collect(),
    ))
}
