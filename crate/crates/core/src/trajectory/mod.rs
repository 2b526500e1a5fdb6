//! Time-stamped trajectory segments and corpora.
//!
//! A segment is the path of one particle over `[s ∧ s+δ, s ∨ s+δ]`, stored
//! as fixes sorted by time. Backward segments (δ < 0) have their sample
//! time at the last fix, forward segments at the first.

mod io;
mod tdump;
mod window;

pub use io::{read_corpus, read_corpus_path, write_corpus, write_corpus_path, HEADER_COLUMNS};
pub use tdump::parse_tdump;
pub use window::{window_corpus, TemporalContext};

use crate::geometry::GeoPoint;
use chrono::{DateTime, TimeZone, Utc};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    MalformedRow { line: u64, msg: String },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("trajectory {0}: fix times are not strictly increasing")]
    NonMonotoneTime(String),
    #[error("trajectory {0}: sample time matches neither the first nor the last fix")]
    SampleTimeMismatch(String),
    #[error("trajectory {traj_id}: {msg}")]
    InvalidFix { traj_id: String, msg: String },
    #[error("corpus mixes forward and backward trajectories")]
    MixedDeltaSign,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("declared lag {declared}s does not match the data ({inferred}s, fix interval {interval}s)")]
    DeltaMismatch {
        declared: i64,
        inferred: i64,
        interval: i64,
    },
}

pub type Result<T, E = TrajectoryError> = std::result::Result<T, E>;

/// Unix seconds to UTC.
pub fn to_datetime(t: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(t, 0).single().expect("timestamp in range")
}

pub fn format_time(t: i64) -> String {
    to_datetime(t).format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Parses an RFC 3339 timestamp with whole seconds into Unix seconds.
pub fn parse_time(s: &str) -> Option<i64> {
    let dt = DateTime::parse_from_rfc3339(s.trim()).ok()?;
    (dt.timestamp_subsec_nanos() == 0).then(|| dt.timestamp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fix {
    /// Unix seconds.
    pub time: i64,
    pub point: GeoPoint,
    /// Covariate values aligned with the corpus covariate names.
    pub cov: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
    /// Single-fix segment.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub traj_id: String,
    pub sample_time: i64,
    pub origin: GeoPoint,
    pub receptor_region: Option<String>,
    pub fixes: Vec<Fix>,
    pub covariate_names: Arc<[String]>,
    /// Set when the segment spans less than the corpus lag (e.g. it left the
    /// meteorological domain early).
    pub truncated: bool,
}

impl TrajectorySegment {
    pub fn new(
        traj_id: impl Into<String>,
        sample_time: i64,
        receptor_region: Option<String>,
        fixes: Vec<Fix>,
        covariate_names: Arc<[String]>,
    ) -> Result<TrajectorySegment> {
        let traj_id = traj_id.into();
        let invalid = |msg: String| TrajectoryError::InvalidFix {
            traj_id: traj_id.clone(),
            msg,
        };
        if fixes.is_empty() {
            return Err(invalid("no fixes".into()));
        }
        if fixes.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(TrajectoryError::NonMonotoneTime(traj_id));
        }
        for f in &fixes {
            f.point.validate().map_err(|e| invalid(e.to_string()))?;
            if f.cov.len() != covariate_names.len() {
                return Err(invalid("covariate count does not match names".into()));
            }
            if f.cov.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid("non-finite covariate".into()));
            }
        }
        let origin = if fixes[0].time == sample_time {
            fixes[0].point
        } else if fixes[fixes.len() - 1].time == sample_time {
            fixes[fixes.len() - 1].point
        } else {
            return Err(TrajectoryError::SampleTimeMismatch(traj_id));
        };
        Ok(TrajectorySegment {
            traj_id,
            sample_time,
            origin,
            receptor_region,
            fixes,
            covariate_names,
            truncated: false,
        })
    }

    pub fn direction(&self) -> Direction {
        if self.fixes.len() == 1 {
            Direction::Stationary
        } else if self.fixes[0].time == self.sample_time {
            Direction::Forward
        } else {
            Direction::Backward
        }
    }

    pub fn span_seconds(&self) -> i64 {
        self.fixes[self.fixes.len() - 1].time - self.fixes[0].time
    }

    pub fn sample_fix_index(&self) -> usize {
        match self.direction() {
            Direction::Backward => self.fixes.len() - 1,
            _ => 0,
        }
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    /// Covariate value at the sample fix, i.e. `Z(s, x)`.
    pub fn origin_covariate(&self, name: &str) -> Option<f64> {
        let k = self.covariate_index(name)?;
        self.fixes[self.sample_fix_index()].cov[k]
    }

    /// Fixes as `(seconds since the first fix, position)`.
    pub fn polyline(&self) -> Vec<(f64, GeoPoint)> {
        let t0 = self.fixes[0].time;
        self.fixes
            .iter()
            .map(|f| ((f.time - t0) as f64, f.point))
            .collect()
    }
}

/// Segments sharing one signed lag δ.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCorpus {
    pub segments: Vec<TrajectorySegment>,
    pub delta_seconds: i64,
    /// Most common spacing between consecutive fixes.
    pub fix_interval: i64,
    pub time_extent: (i64, i64),
    pub covariate_names: Arc<[String]>,
}

impl TrajectoryCorpus {
    /// Infers δ from the data (sign from the segment directions, magnitude
    /// from the longest span) and flags truncated segments.
    pub fn new(
        mut segments: Vec<TrajectorySegment>,
        covariate_names: Arc<[String]>,
    ) -> Result<TrajectoryCorpus> {
        if segments.is_empty() {
            return Err(TrajectoryError::EmptyCorpus);
        }
        let mut sign = 0i64;
        for s in &segments {
            let d = match s.direction() {
                Direction::Forward => 1,
                Direction::Backward => -1,
                Direction::Stationary => continue,
            };
            if sign != 0 && d != sign {
                return Err(TrajectoryError::MixedDeltaSign);
            }
            sign = d;
        }
        let span = segments.iter().map(|s| s.span_seconds()).max().unwrap_or(0);
        let mut gaps: Vec<i64> = segments
            .iter()
            .flat_map(|s| s.fixes.windows(2).map(|w| w[1].time - w[0].time))
            .collect();
        let fix_interval = mode(&mut gaps).unwrap_or(0);
        for s in &mut segments {
            s.truncated = s.span_seconds() < span - fix_interval;
        }
        let lo = segments.iter().map(|s| s.sample_time).min().unwrap();
        let hi = segments.iter().map(|s| s.sample_time).max().unwrap();
        Ok(TrajectoryCorpus {
            segments,
            delta_seconds: if sign < 0 { -span } else { span },
            fix_interval,
            time_extent: (lo, hi),
            covariate_names,
        })
    }

    /// Checks a declared lag against the inferred one, allowing one fix
    /// interval of slack.
    pub fn validate_delta(&self, declared: i64) -> Result<()> {
        let ok = declared.signum() == self.delta_seconds.signum()
            && (declared - self.delta_seconds).abs() <= self.fix_interval;
        if ok {
            Ok(())
        } else {
            Err(TrajectoryError::DeltaMismatch {
                declared,
                inferred: self.delta_seconds,
                interval: self.fix_interval,
            })
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// A sub-corpus keeping this corpus' lag and covariate names.
    pub(crate) fn subset(&self, segments: Vec<TrajectorySegment>) -> TrajectoryCorpus {
        let lo = segments.iter().map(|s| s.sample_time).min().unwrap_or(0);
        let hi = segments.iter().map(|s| s.sample_time).max().unwrap_or(0);
        TrajectoryCorpus {
            segments,
            delta_seconds: self.delta_seconds,
            fix_interval: self.fix_interval,
            time_extent: (lo, hi),
            covariate_names: self.covariate_names.clone(),
        }
    }
}

/// Most frequent value; smallest on ties.
fn mode(values: &mut [i64]) -> Option<i64> {
    values.sort_unstable();
    let mut best: Option<(i64, usize)> = None;
    for chunk in values.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(_, n)| chunk.len() > n) {
            best = Some((chunk[0], chunk.len()));
        }
    }
    best.map(|(v, _)| v)
}
