//! TrajCsvV1: `traj_id,receptor_region,sample_time,point_time,lon_deg,lat_deg,alt_m[,cov:<name>...]`

use super::{
    format_time, parse_time, Fix, Result, TrajectoryCorpus, TrajectoryError, TrajectorySegment,
};
use crate::geometry::GeoPoint;
use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

pub const HEADER_COLUMNS: [&str; 7] = [
    "traj_id",
    "receptor_region",
    "sample_time",
    "point_time",
    "lon_deg",
    "lat_deg",
    "alt_m",
];

const COV_PREFIX: &str = "cov:";

struct Pending {
    traj_id: String,
    receptor: Option<String>,
    sample_time: i64,
    fixes: Vec<Fix>,
}

pub fn read_corpus<R: Read>(reader: R) -> Result<TrajectoryCorpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| TrajectoryError::BadHeader(e.to_string()))?
        .clone();
    if header.len() < HEADER_COLUMNS.len()
        || header.iter().take(HEADER_COLUMNS.len()).ne(HEADER_COLUMNS)
    {
        return Err(TrajectoryError::BadHeader(format!(
            "expected {}, got {}",
            HEADER_COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut cov_names = Vec::new();
    for h in header.iter().skip(HEADER_COLUMNS.len()) {
        match h.strip_prefix(COV_PREFIX) {
            Some(name) if !name.is_empty() && !cov_names.iter().any(|n| n == name) => {
                cov_names.push(name.to_string())
            }
            _ => {
                return Err(TrajectoryError::BadHeader(format!(
                    "extra column {h:?} is not a unique cov:<name> column"
                )))
            }
        }
    }
    let cov_names: Arc<[String]> = Arc::from(cov_names);

    let mut segments = Vec::new();
    let mut seen = HashSet::new();
    let mut pending: Option<Pending> = None;
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            TrajectoryError::MalformedRow {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: String| TrajectoryError::MalformedRow { line, msg };

        let traj_id = &record[0];
        if traj_id.is_empty() {
            return Err(bad("empty traj_id".into()));
        }
        let receptor = (!record[1].is_empty()).then(|| record[1].to_string());
        let sample_time =
            parse_time(&record[2]).ok_or_else(|| bad(format!("bad sample_time {:?}", &record[2])))?;
        let time =
            parse_time(&record[3]).ok_or_else(|| bad(format!("bad point_time {:?}", &record[3])))?;
        let num = |k: usize, what: &str| -> Result<f64> {
            record[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("bad {what} {:?}", &record[k])))
        };
        let lon = num(4, "lon_deg")?;
        let lat = num(5, "lat_deg")?;
        let alt = if record[6].is_empty() {
            None
        } else {
            Some(num(6, "alt_m")?)
        };
        let point = GeoPoint { lon, lat, alt };
        point.validate().map_err(|e| bad(e.to_string()))?;
        let cov = (HEADER_COLUMNS.len()..record.len())
            .map(|k| {
                if record[k].is_empty() {
                    Ok(None)
                } else {
                    num(k, &header[k]).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;

        match &mut pending {
            Some(p) if p.traj_id == traj_id => {
                if p.sample_time != sample_time || p.receptor != receptor {
                    return Err(bad(format!(
                        "trajectory {traj_id}: sample_time/receptor_region change within trajectory"
                    )));
                }
                if time <= p.fixes.last().map_or(i64::MIN, |f| f.time) {
                    return Err(TrajectoryError::NonMonotoneTime(traj_id.to_string()));
                }
                p.fixes.push(Fix { time, point, cov });
            }
            _ => {
                if !seen.insert(traj_id.to_string()) {
                    return Err(bad(format!("rows for trajectory {traj_id} are not contiguous")));
                }
                if let Some(p) = pending.take() {
                    segments.push(finish(p, &cov_names)?);
                }
                pending = Some(Pending {
                    traj_id: traj_id.to_string(),
                    receptor,
                    sample_time,
                    fixes: vec![Fix { time, point, cov }],
                });
            }
        }
    }
    if let Some(p) = pending.take() {
        segments.push(finish(p, &cov_names)?);
    }
    TrajectoryCorpus::new(segments, cov_names)
}

fn finish(p: Pending, names: &Arc<[String]>) -> Result<TrajectorySegment> {
    TrajectorySegment::new(p.traj_id, p.sample_time, p.receptor, p.fixes, names.clone())
}

pub fn read_corpus_path(path: &Path) -> Result<TrajectoryCorpus> {
    let f = std::fs::File::open(path).map_err(|source| TrajectoryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(std::io::BufReader::new(f))
}

pub fn write_corpus<W: Write>(corpus: &TrajectoryCorpus, writer: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<String> = HEADER_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(corpus.covariate_names.iter().map(|n| format!("{COV_PREFIX}{n}")));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &corpus.segments {
        let sample = format_time(s.sample_time);
        let receptor = s.receptor_region.clone().unwrap_or_default();
        for f in &s.fixes {
            let mut row = vec![
                s.traj_id.clone(),
                receptor.clone(),
                sample.clone(),
                format_time(f.time),
                f.point.lon.to_string(),
                f.point.lat.to_string(),
                opt(f.point.alt),
            ];
            row.extend(f.cov.iter().map(|v| opt(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()
}

pub fn write_corpus_path(corpus: &TrajectoryCorpus, path: &Path) -> std::io::Result<()> {
    let f = std::fs::File::create(path)?;
    write_corpus(corpus, std::io::BufWriter::new(f))
}
