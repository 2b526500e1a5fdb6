use super::{CostMode, IndexVector, MetricsError, Result};
use crate::numeric::fmt_f64;
use std::io::{BufRead, BufReader, Read, Write};

pub const INDEX_COLUMNS: [&str; 13] = [
    "window_id",
    "diam",
    "dens",
    "trans",
    "sp_mean",
    "sp_sd",
    "sw",
    "sf_alpha",
    "dc",
    "cost_mode",
    "null_seed",
    "n_null",
    "unreachable_pairs",
];

const MAGIC: &str = "# aeronet-indices v1";

/// Writes one row per vector; undefined indices are empty cells.
pub fn write_indices<W: Write>(
    vectors: &[IndexVector],
    fingerprint: Option<&str>,
    mut w: W,
) -> std::io::Result<()> {
    match fingerprint {
        Some(fp) => writeln!(w, "{MAGIC}; config={fp}")?,
        None => writeln!(w, "{MAGIC}")?,
    }
    writeln!(w, "{}", INDEX_COLUMNS.join(","))?;
    for v in vectors {
        let mut cells = vec![v.window_id.clone()];
        cells.extend(v.features().iter().map(|x| x.map(fmt_f64).unwrap_or_default()));
        cells.push(v.cost_mode.to_string());
        cells.push(v.null_seed.to_string());
        cells.push(v.n_null.to_string());
        cells.push(v.unreachable_pairs.map(|u| u.to_string()).unwrap_or_default());
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

fn bad(line: usize, msg: impl std::fmt::Display) -> MetricsError {
    MetricsError::InvalidArgument(format!("indices line {line}: {msg}"))
}

pub fn read_indices<R: Read>(r: R) -> Result<Vec<IndexVector>> {
    let mut out = Vec::new();
    let mut seen_columns = false;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| bad(n, e))?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if !seen_columns {
            if f != INDEX_COLUMNS {
                return Err(bad(n, "unexpected column line"));
            }
            seen_columns = true;
            continue;
        }
        if f.len() != INDEX_COLUMNS.len() {
            return Err(bad(n, format!("expected {} fields", INDEX_COLUMNS.len())));
        }
        let num = |k: usize| -> Result<Option<f64>> {
            if f[k].is_empty() {
                Ok(None)
            } else {
                f[k].parse().map(Some).map_err(|_| bad(n, format!("bad number {:?}", f[k])))
            }
        };
        out.push(IndexVector {
            window_id: f[0].to_string(),
            diameter: num(1)?,
            density: num(2)?,
            transitivity: num(3)?,
            sp_mean: num(4)?,
            sp_sd: num(5)?,
            small_worldness: num(6)?,
            scale_free_alpha: num(7)?,
            degree_correlation: num(8)?,
            cost_mode: f[9].parse::<CostMode>().map_err(|e| bad(n, e))?,
            null_seed: f[10].parse().map_err(|_| bad(n, "bad null_seed"))?,
            n_null: f[11].parse().map_err(|_| bad(n, "bad n_null"))?,
            unreachable_pairs: if f[12].is_empty() {
                None
            } else {
                Some(f[12].parse().map_err(|_| bad(n, "bad unreachable_pairs"))?)
            },
            errors: Vec::new(),
        });
    }
    if !seen_columns {
        return Err(bad(0, "missing column line"));
    }
    Ok(out)
}
