//! Edge-list format:
//!
//! ```text
//! # aeronet-edges v1; measure=contact; direction=transport; b_area=unit
//! # config=<sha256>            (optional)
//! # nodes=a,b,c
//! # windows=2011,2012
//! window_id,src,dst,weight
//! 2011,a,b,0.25
//! ```
//!
//! Absent edges have no row; zero weights are written.

use crate::numeric::fmt_f64;
use super::{BAreaMode, EdgeDirection, NetworkError, NetworkSequence, Result, WindowedAdjacency};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

const MAGIC: &str = "# aeronet-edges v1";
const COLUMNS: &str = "window_id,src,dst,weight";

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains([',', ';', '\n', '\r', '"']) {
        return Err(NetworkError::InvalidId(id.to_string()));
    }
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NetworkError + '_ {
    move |source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_edges<W: Write>(seq: &NetworkSequence, mut w: W) -> std::result::Result<(), WriteError> {
    for id in seq.node_ids.iter().chain(seq.windows.iter().map(|w| &w.window_id)) {
        check_id(id)?;
    }
    if seq.measure.contains(['\n', ';']) {
        return Err(NetworkError::InvalidId(seq.measure.clone()).into());
    }
    writeln!(
        w,
        "{MAGIC}; measure={}; direction={}; b_area={}",
        seq.measure, seq.direction, seq.b_area
    )?;
    if let Some(fp) = &seq.config_fingerprint {
        writeln!(w, "# config={fp}")?;
    }
    writeln!(w, "# nodes={}", seq.node_ids.join(","))?;
    let wids: Vec<&str> = seq.windows.iter().map(|w| w.window_id.as_str()).collect();
    writeln!(w, "# windows={}", wids.join(","))?;
    writeln!(w, "{COLUMNS}")?;
    for win in &seq.windows {
        for (i, j, v) in win.edges() {
            writeln!(
                w,
                "{},{},{},{}",
                win.window_id,
                seq.node_ids[i],
                seq.node_ids[j],
                fmt_f64(v)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write failures: either a value the format cannot carry or an I/O error.
#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_edges_path(seq: &NetworkSequence, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_edges(seq, BufWriter::new(f)).map_err(|e| match e {
        WriteError::Network(n) => n,
        WriteError::Io(source) => io_err(path)(source),
    })
}

fn malformed(line: usize, msg: impl Into<String>) -> NetworkError {
    NetworkError::Malformed { line, msg: msg.into() }
}

fn split_list(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(str::to_string).collect()
    }
}

pub fn read_edges<R: std::io::Read>(r: R) -> Result<NetworkSequence> {
    let mut lines = BufReader::new(r).lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((n, l)) => l
                .map(|l| Some((n, l)))
                .map_err(|e| malformed(n, e.to_string())),
        }
    };

    let (_, header) = next()?.ok_or_else(|| NetworkError::FormatVersionMismatch("empty file".into()))?;
    let rest = header
        .strip_prefix(MAGIC)
        .and_then(|r| r.strip_prefix("; "))
        .ok_or_else(|| NetworkError::FormatVersionMismatch(format!("unrecognised header {header:?}")))?;
    let mut kv: HashMap<&str, &str> = HashMap::new();
    for part in rest.split("; ") {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| NetworkError::FormatVersionMismatch(format!("bad header field {part:?}")))?;
        kv.insert(k, v);
    }
    let field = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| NetworkError::FormatVersionMismatch(format!("header lacks {k}")))
    };
    let measure = field("measure")?.to_string();
    let direction: EdgeDirection = field("direction")?
        .parse()
        .map_err(NetworkError::FormatVersionMismatch)?;
    let b_area: BAreaMode = field("b_area")?
        .parse()
        .map_err(NetworkError::FormatVersionMismatch)?;

    let mut fingerprint = None;
    let mut nodes = None;
    let mut window_ids = None;
    let columns_line = loop {
        let (n, l) = next()?.ok_or_else(|| malformed(0, "missing column line"))?;
        if let Some(c) = l.strip_prefix("# ") {
            match c.split_once('=') {
                Some(("config", v)) => fingerprint = Some(v.to_string()),
                Some(("nodes", v)) => nodes = Some(split_list(v)),
                Some(("windows", v)) => window_ids = Some(split_list(v)),
                _ => log::debug!("line {n}: ignoring comment"),
            }
        } else if l == COLUMNS {
            break n;
        } else {
            return Err(malformed(n, format!("expected {COLUMNS:?}")));
        }
    };
    let nodes = nodes.ok_or_else(|| malformed(columns_line, "missing nodes line"))?;
    let window_ids = window_ids.ok_or_else(|| malformed(columns_line, "missing windows line"))?;
    let node_ids: Arc<[String]> = Arc::from(nodes);
    let node_index: HashMap<&str, usize> = node_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut windows: Vec<WindowedAdjacency> = window_ids
        .iter()
        .map(|id| WindowedAdjacency::empty(id.clone(), node_ids.clone(), direction, measure.clone()))
        .collect();
    let window_index: HashMap<String, usize> =
        window_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    while let Some((n, l)) = next()? {
        if l.is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 4 {
            return Err(malformed(n, format!("expected 4 fields, got {}", f.len())));
        }
        let wi = *window_index
            .get(f[0])
            .ok_or_else(|| malformed(n, format!("unknown window {:?}", f[0])))?;
        let node = |s: &str| {
            node_index
                .get(s)
                .copied()
                .ok_or_else(|| malformed(n, format!("unknown node {s:?}")))
        };
        let (i, j) = (node(f[1])?, node(f[2])?);
        if i == j {
            return Err(malformed(n, "self-loop"));
        }
        let v: f64 = f[3]
            .parse()
            .map_err(|_| malformed(n, format!("bad weight {:?}", f[3])))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(malformed(n, format!("weight {v} must be finite and >= 0")));
        }
        windows[wi].set(i, j, Some(v));
    }
    Ok(NetworkSequence {
        node_ids,
        windows,
        direction,
        measure,
        b_area,
        config_fingerprint: fingerprint,
    })
}

pub fn read_edges_path(path: &Path) -> Result<NetworkSequence> {
    read_edges(File::open(path).map_err(io_err(path))?)
}

/// One CSV matrix per window, `<dir>/<window_id>.csv`; absent edges are
/// empty cells.
pub fn write_dense(seq: &NetworkSequence, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for win in &seq.windows {
        check_id(&win.window_id)?;
        let path = dir.join(format!("{}.csv", win.window_id));
        let mut out = Vec::new();
        if let Some(fp) = &seq.config_fingerprint {
            out.push(format!("# config={fp}"));
        }
        out.push(format!("node,{}", seq.node_ids.join(",")));
        for i in 0..win.len() {
            let cells: Vec<String> = (0..win.len())
                .map(|j| win.get(i, j).map(fmt_f64).unwrap_or_default())
                .collect();
            out.push(format!("{},{}", seq.node_ids[i], cells.join(",")));
        }
        out.push(String::new());
        std::fs::write(&path, out.join("\n")).map_err(io_err(&path))?;
    }
    Ok(())
}
