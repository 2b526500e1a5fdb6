//! Converter for HYSPLIT trajectory endpoint ("tdump") files.
//!
//! Layout: a met-grid count followed by one line per grid, a trajectory
//! count line, one start line per trajectory, a diagnostic-variable line,
//! then one endpoint row per (trajectory, hour):
//! `traj grid yr mo dy hr mn fhr age lat lon height [diag...]`.

use super::{Fix, Result, TrajectoryCorpus, TrajectoryError, TrajectorySegment};
use crate::geometry::GeoPoint;
use chrono::{NaiveDate, NaiveDateTime};
use std::collections::BTreeMap;
use std::sync::Arc;

fn full_year(y: i32) -> i32 {
    match y {
        0..=39 => 2000 + y,
        40..=99 => 1900 + y,
        _ => y,
    }
}

fn timestamp(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> Option<i64> {
    let date = NaiveDate::from_ymd_opt(full_year(y), mo, d)?;
    let dt: NaiveDateTime = date.and_hms_opt(h, mi, 0)?;
    Some(dt.and_utc().timestamp())
}

/// Parses a tdump text into a corpus. Trajectory ids are `<prefix><n>`;
/// diagnostic variables become lower-cased covariates.
pub fn parse_tdump(text: &str, prefix: &str, receptor: Option<&str>) -> Result<TrajectoryCorpus> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    let mut next = |what: &str| -> Result<(u64, Vec<&str>)> {
        lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| (n, l.split_whitespace().collect()))
            .ok_or_else(|| TrajectoryError::MalformedRow {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            })
    };
    let int = |line: u64, tok: Option<&&str>, what: &str| -> Result<i64> {
        tok.and_then(|t| t.parse::<i64>().ok())
            .ok_or_else(|| TrajectoryError::MalformedRow {
                line,
                msg: format!("expected integer {what}"),
            })
    };

    let (ln, toks) = next("met grid count")?;
    let n_grids = int(ln, toks.first(), "grid count")?;
    for _ in 0..n_grids {
        next("met grid line")?;
    }
    let (ln, toks) = next("trajectory count")?;
    let n_traj = int(ln, toks.first(), "trajectory count")?;
    let mut starts = Vec::new();
    for _ in 0..n_traj {
        let (ln, t) = next("start line")?;
        let get = |k: usize| int(ln, t.get(k), "start time field");
        let ts = timestamp(get(0)? as i32, get(1)? as u32, get(2)? as u32, get(3)? as u32, 0)
            .ok_or_else(|| TrajectoryError::MalformedRow {
                line: ln,
                msg: "invalid start time".into(),
            })?;
        starts.push(ts);
    }
    let (ln, toks) = next("diagnostic variable line")?;
    let n_diag = int(ln, toks.first(), "diagnostic count")? as usize;
    let diag: Vec<String> = toks.iter().skip(1).map(|s| s.to_lowercase()).collect();
    if diag.len() != n_diag {
        return Err(TrajectoryError::MalformedRow {
            line: ln,
            msg: format!("expected {n_diag} diagnostic names, got {}", diag.len()),
        });
    }
    let names: Arc<[String]> = Arc::from(diag);

    let mut rows: BTreeMap<i64, Vec<Fix>> = BTreeMap::new();
    for (ln, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        if t.len() < 12 + n_diag {
            return Err(TrajectoryError::MalformedRow {
                line: ln,
                msg: format!("expected {} fields, got {}", 12 + n_diag, t.len()),
            });
        }
        let bad = |msg: &str| TrajectoryError::MalformedRow {
            line: ln,
            msg: msg.to_string(),
        };
        let i = |k: usize| t[k].parse::<i64>().map_err(|_| bad("bad integer field"));
        let f = |k: usize| t[k].parse::<f64>().map_err(|_| bad("bad numeric field"));
        let traj = i(0)?;
        let time = timestamp(i(2)? as i32, i(3)? as u32, i(4)? as u32, i(5)? as u32, i(6)? as u32)
            .ok_or_else(|| bad("invalid endpoint time"))?;
        let point = GeoPoint::with_alt(f(10)?, f(9)?, f(11)?).map_err(|e| bad(&e.to_string()))?;
        let cov = (0..n_diag).map(|k| f(12 + k).map(Some)).collect::<Result<Vec<_>>>()?;
        rows.entry(traj).or_default().push(Fix { time, point, cov });
    }

    let mut segments = Vec::with_capacity(rows.len());
    for (traj, mut fixes) in rows {
        let start = usize::try_from(traj - 1)
            .ok()
            .and_then(|k| starts.get(k))
            .copied()
            .ok_or_else(|| TrajectoryError::MalformedRow {
                line: 0,
                msg: format!("endpoint rows reference unknown trajectory {traj}"),
            })?;
        fixes.sort_by_key(|f| f.time);
        segments.push(TrajectorySegment::new(
            format!("{prefix}{traj}"),
            start,
            receptor.map(str::to_string),
            fixes,
            names.clone(),
        )?);
    }
    TrajectoryCorpus::new(segments, names)
}
