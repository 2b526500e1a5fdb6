use super::{
    duration_arg, emit, fingerprint, parse_floats, read_file, AppendixArgs, ArrivalsArgs, BuffersArgs,
    CliError, ClusterArgs, ConvertTdumpArgs, FieldKind, GridArgs, IndicesArgs, NetworkArgs, Result,
    Settings, SimulateArgs,
};
use crate::connectivity::MeasureConfig;
use crate::flowsim::{generate_corpus, Arrival, PlanarAnchor, SimulationConfig, VectorField};
use crate::geometry::{
    allocate_samples, buffer_partition, grid_partition, haversine_km, sample_points, GeoPoint, Partition,
};
use crate::metrics::{
    bearing_histogram, edge_quantile_categories, five_number_summary, hclust_complete, index_vector,
    read_indices, sector_start_deg, write_indices, IndexVector, MetricsError, NullConfig,
};
use crate::network::{build_networks, read_edges, write_dense, write_edges, NetworkConfig, WriteError};
use crate::numeric::fmt_f64;
use crate::trajectory::{parse_tdump, parse_time, read_corpus, write_corpus, TemporalContext, TrajectoryCorpus};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

fn utf8(bytes: Vec<u8>, path: &Path) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{}: not UTF-8", path.display())))
}

fn load_partition(path: &Path) -> Result<(Partition, Vec<u8>)> {
    let bytes = read_file(path)?;
    let p = Partition::from_geojson_str(&utf8(bytes.clone(), path)?).map_err(|e| CliError::from(e).at(path))?;
    Ok((p, bytes))
}

fn load_corpus(path: &Path) -> Result<(TrajectoryCorpus, Vec<u8>)> {
    let bytes = read_file(path)?;
    let c = read_corpus(&bytes[..]).map_err(|e| CliError::from(e).at(path))?;
    Ok((c, bytes))
}

fn partition_output(p: &Partition, fp: &str) -> Vec<u8> {
    let mut v = p.to_geojson();
    v["aeronet"] = json!({ "config": fp });
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values serialise");
    s.push('\n');
    s.into_bytes()
}

fn corpus_output(c: &TrajectoryCorpus, fp: &str) -> Result<Vec<u8>> {
    let mut buf = format!("# config={fp}\n").into_bytes();
    write_corpus(c, &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(buf)
}

/// Independent seed per region index.
fn region_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub(super) fn grid(a: &GridArgs, s: &Settings) -> Result<()> {
    let g = parse_floats(&a.grid, 5, "grid")?;
    let (mask, mask_bytes) = match &a.mask {
        Some(p) => {
            let (m, b) = load_partition(p)?;
            (Some(m), b)
        }
        None => (None, Vec::new()),
    };
    let p = grid_partition(g[0], g[1], g[2], g[3], g[4], mask.as_ref())?;
    log::info!("grid: {} cells", p.len());
    let fp = fingerprint("grid", &json!({ "grid": g }), &[&mask_bytes]);
    emit(s.output(a.out.as_ref(), "partition.geojson").as_deref(), &partition_output(&p, &fp))
}

#[derive(Deserialize)]
struct CenterRow {
    id: String,
    lon: f64,
    lat: f64,
}

pub(super) fn buffers(a: &BuffersArgs, s: &Settings) -> Result<()> {
    let bytes = read_file(&a.centers)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(&bytes[..]);
    let mut centers = Vec::new();
    for row in rdr.deserialize::<CenterRow>() {
        let r = row.map_err(|e| CliError::Data(format!("{}: {e}", a.centers.display())))?;
        let pt = GeoPoint::new(r.lon, r.lat).map_err(|e| CliError::from(e).at(&a.centers))?;
        centers.push((r.id, pt));
    }
    let p = buffer_partition(&centers, a.radius_km, a.vertices)?;
    let fp = fingerprint(
        "buffers",
        &json!({ "radius_km": a.radius_km, "vertices": a.vertices }),
        &[&bytes],
    );
    emit(s.output(a.out.as_ref(), "partition.geojson").as_deref(), &partition_output(&p, &fp))
}

pub(super) fn arrivals(a: &ArrivalsArgs, s: &Settings) -> Result<()> {
    let path = s.path_or_config(a.partition.as_ref(), s.run.partition.as_ref(), "partition")?;
    let (p, bytes) = load_partition(&path)?;
    let counts = allocate_samples(&p, a.min, a.max)?;
    let fp = fingerprint("arrivals", &json!({ "min": a.min, "max": a.max, "seed": s.seed }), &[&bytes]);
    let mut out = format!("# config={fp}\nlon,lat,receptor\n");
    for (k, r) in p.regions().iter().enumerate() {
        for pt in sample_points(r, counts[r.id()], region_seed(s.seed, k))? {
            writeln!(out, "{},{},{}", fmt_f64(pt.lon), fmt_f64(pt.lat), r.id()).unwrap();
        }
    }
    emit(s.output(a.out.as_ref(), "arrivals.csv").as_deref(), out.as_bytes())
}

#[derive(Deserialize)]
struct ArrivalRow {
    lon: f64,
    lat: f64,
    receptor: Option<String>,
}

fn read_times(text: &str, path: &Path) -> Result<Vec<i64>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            parse_time(l)
                .or_else(|| l.parse().ok())
                .ok_or_else(|| CliError::Data(format!("{}:{n}: bad time {l:?}", path.display())))
        })
        .collect()
}

fn build_field(a: &SimulateArgs, time_unit: f64) -> Result<VectorField> {
    // rates are given per time unit, the integrator works in seconds
    let r = 1.0 / time_unit;
    let need_omega = || {
        a.omega
            .ok_or_else(|| CliError::Validation("--omega is required for this field".into()))
    };
    Ok(match a.field {
        FieldKind::Uniform => VectorField::Uniform { u: a.u * r, v: a.v * r },
        FieldKind::Rotation => {
            let c = parse_floats(&a.center, 2, "center")?;
            VectorField::Rotation { omega: need_omega()? * r, center: [c[0], c[1]] }
        }
        FieldKind::Shear => VectorField::Shear { k: a.k * r },
        FieldKind::DoubleGyre => VectorField::DoubleGyre {
            a: a.amplitude * r,
            eps: a.epsilon,
            omega: a.omega.unwrap_or(2.0 * std::f64::consts::PI / 10.0) * r,
        },
        FieldKind::Linear => {
            let m = a
                .matrix
                .as_deref()
                .ok_or_else(|| CliError::Validation("--matrix is required for the linear field".into()))?;
            let m = parse_floats(m, 4, "matrix")?;
            VectorField::Linear { m: [[m[0] * r, m[1] * r], [m[2] * r, m[3] * r]] }
        }
    })
}

pub(super) fn simulate(a: &SimulateArgs, s: &Settings) -> Result<()> {
    let delta_text = a
        .delta
        .clone()
        .or_else(|| s.run.delta.clone())
        .ok_or_else(|| CliError::Validation("no --delta given".into()))?;
    let delta = duration_arg(&delta_text, "delta")?;
    let h = duration_arg(&a.h, "h")?;
    let fix_interval = duration_arg(&a.fix_interval, "fix-interval")?;
    let time_unit = duration_arg(&a.time_unit, "time-unit")?;
    if time_unit <= 0 {
        return Err(CliError::Validation("--time-unit must be positive".into()));
    }
    let anchor = parse_floats(&a.anchor, 2, "anchor")?;
    let field = build_field(a, time_unit as f64)?;

    let arrival_bytes = read_file(&a.arrivals)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(&arrival_bytes[..]);
    let mut arrivals = Vec::new();
    for row in rdr.deserialize::<ArrivalRow>() {
        let r = row.map_err(|e| CliError::Data(format!("{}: {e}", a.arrivals.display())))?;
        let point = GeoPoint::new(r.lon, r.lat).map_err(|e| CliError::from(e).at(&a.arrivals))?;
        arrivals.push(Arrival { point, receptor: r.receptor.filter(|x| !x.is_empty()) });
    }
    let time_bytes = read_file(&a.times)?;
    let times = read_times(&utf8(time_bytes.clone(), &a.times)?, &a.times)?;

    let cfg = SimulationConfig {
        field,
        anchor: PlanarAnchor {
            lon: anchor[0],
            lat: anchor[1],
            km_per_unit: a.km_per_unit,
            // flow time 0 at the earliest arrival
            epoch: times.iter().copied().min().unwrap_or(0),
        },
        delta_seconds: delta,
        h: h as f64,
        fix_interval,
        jacobian_eps: a.jacobian_eps,
    };
    let corpus = generate_corpus(&cfg, &arrivals, &times)?;
    log::info!("simulate: {} trajectories", corpus.len());
    let settings = json!({
        "field": format!("{:?}", cfg.field),
        "anchor": [cfg.anchor.lon, cfg.anchor.lat, cfg.anchor.km_per_unit, cfg.anchor.epoch],
        "delta": delta,
        "h": h,
        "fix_interval": fix_interval,
        "jacobian_eps": a.jacobian_eps,
    });
    let fp = fingerprint("simulate", &settings, &[&arrival_bytes, &time_bytes]);
    emit(s.output(a.out.as_ref(), "corpus.csv").as_deref(), &corpus_output(&corpus, &fp)?)
}

pub(super) fn convert_tdump(a: &ConvertTdumpArgs, s: &Settings) -> Result<()> {
    let bytes = read_file(&a.input)?;
    let text = utf8(bytes.clone(), &a.input)?;
    let corpus = parse_tdump(&text, &a.prefix, a.receptor.as_deref()).map_err(|e| CliError::from(e).at(&a.input))?;
    let fp = fingerprint(
        "convert-tdump",
        &json!({ "prefix": a.prefix, "receptor": a.receptor }),
        &[&bytes],
    );
    emit(s.output(a.out.as_ref(), "corpus.csv").as_deref(), &corpus_output(&corpus, &fp)?)
}

pub(super) fn network(a: &NetworkArgs, s: &Settings) -> Result<()> {
    let part_path = s.path_or_config(a.partition.as_ref(), s.run.partition.as_ref(), "partition")?;
    let corpus_path = s.path_or_config(a.corpus.as_ref(), s.run.corpus.as_ref(), "corpus")?;
    let measure_cfg = match (&a.measure, &s.run.measure) {
        (Some(name), _) => MeasureConfig { measure: name.clone(), ..Default::default() },
        (None, Some(m)) => m.clone(),
        (None, None) => MeasureConfig::contact(),
    };
    let measure = measure_cfg.build(&s.base_dir)?;
    let events_bytes = match &measure_cfg.events_file {
        Some(f) => read_file(&s.resolve(Path::new(f)))?,
        None => Vec::new(),
    };
    let (partition, part_bytes) = load_partition(&part_path)?;
    let (corpus, corpus_bytes) = load_corpus(&corpus_path)?;
    if let Some(d) = a.delta.as_ref().or(s.run.delta.as_ref()) {
        corpus
            .validate_delta(duration_arg(d, "delta")?)
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let cfg = NetworkConfig {
        measure,
        t_length: a.t_length.or(s.run.t_length).unwrap_or(1.0),
        b_area: s.b_area,
        context: a.context.or(s.run.context).unwrap_or(TemporalContext::Whole),
        direction: s.direction,
    };
    let settings = json!({
        "measure": cfg.measure.to_string(),
        "t_length": cfg.t_length,
        "b_area": cfg.b_area.to_string(),
        "context": cfg.context.to_string(),
        "direction": cfg.direction.to_string(),
    });
    let fp = fingerprint("network", &settings, &[&part_bytes, &corpus_bytes, &events_bytes]);
    let mut seq = build_networks(&corpus, &partition, &cfg)?;
    seq.config_fingerprint = Some(fp);
    log::info!("network: {} windows over {} regions", seq.windows.len(), seq.node_ids.len());
    let mut buf = Vec::new();
    write_edges(&seq, &mut buf).map_err(|e| match e {
        WriteError::Network(n) => CliError::from(n),
        WriteError::Io(io) => CliError::Data(io.to_string()),
    })?;
    if let Some(dir) = &a.dense {
        write_dense(&seq, dir)?;
    }
    emit(s.output(a.out.as_ref(), "edges.csv").as_deref(), &buf)
}

pub(super) fn indices(a: &IndicesArgs, s: &Settings) -> Result<()> {
    let bytes = read_file(&a.edges)?;
    let seq = read_edges(&bytes[..]).map_err(|e| CliError::from(e).at(&a.edges))?;
    let null_cfg = NullConfig {
        n_null: a
            .n_null
            .or(s.run.null.as_ref().and_then(|n| n.n_null))
            .unwrap_or(NullConfig::default().n_null),
        seed: s.seed,
    };
    let vectors: Vec<IndexVector> = seq
        .windows
        .par_iter()
        .map(|w| index_vector(w, s.cost_mode, &null_cfg))
        .collect();
    let settings = json!({ "cost_mode": s.cost_mode.to_string(), "seed": null_cfg.seed, "n_null": null_cfg.n_null });
    let fp = fingerprint("indices", &settings, &[&bytes]);
    let mut buf = Vec::new();
    write_indices(&vectors, Some(&fp), &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
    emit(s.output(a.out.as_ref(), "indices.csv").as_deref(), &buf)
}

pub(super) fn cluster(a: &ClusterArgs, s: &Settings) -> Result<()> {
    let bytes = read_file(&a.indices)?;
    let vectors = read_indices(&bytes[..]).map_err(|e| CliError::Data(format!("{}: {e}", a.indices.display())))?;
    let standardize = !a.raw && s.run.standardize.unwrap_or(true);
    let d = hclust_complete(&vectors, standardize)?;
    let fp = fingerprint("cluster", &json!({ "standardize": standardize, "k": a.k }), &[&bytes]);
    let newick = format!("[config={fp}]{}\n", d.to_newick());
    emit(s.output(a.out.as_ref(), "clusters.nwk").as_deref(), newick.as_bytes())?;

    if let Some(path) = s.output(a.report.as_ref(), "merges.csv") {
        let mut out = format!("# config={fp}\n# dimensions={}\nstep,a,b,height,size\n", d.dimensions.join(" "));
        for (k, m) in d.merges.iter().enumerate() {
            writeln!(out, "{},{},{},{},{}", k + 1, m.a, m.b, fmt_f64(m.height), m.size).unwrap();
        }
        emit(Some(&path), out.as_bytes())?;
    }
    if let Some(path) = s.output(a.assignments.as_ref(), "assignments.csv") {
        let mut out = format!("# config={fp}\nwindow_id,cluster\n");
        for (label, c) in d.labels.iter().zip(d.cut(a.k)) {
            writeln!(out, "{label},{c}").unwrap();
        }
        emit(Some(&path), out.as_bytes())?;
    }
    Ok(())
}

pub(super) fn appendix(a: &AppendixArgs, s: &Settings) -> Result<()> {
    let part_path = s.path_or_config(a.partition.as_ref(), s.run.partition.as_ref(), "partition")?;
    let dir = a
        .out_dir
        .clone()
        .or_else(|| s.run.output_dir.as_ref().map(|d| s.resolve(d)))
        .ok_or_else(|| CliError::Validation("no --out-dir given".into()))?;
    let bytes = read_file(&a.edges)?;
    let seq = read_edges(&bytes[..]).map_err(|e| CliError::from(e).at(&a.edges))?;
    let (partition, part_bytes) = load_partition(&part_path)?;
    let fp = fingerprint("appendix", &json!({ "bins": a.bins, "sectors": a.sectors }), &[&bytes, &part_bytes]);

    let head = format!("# config={fp}\n");
    let mut classes = head.clone() + "window_id,category,n_edges,min_weight,max_weight\n";
    let mut distances = head.clone() + "window_id,category,src,dst,distance_km\n";
    let mut summary = head.clone() + "window_id,category,n,min,q1,median,q3,max\n";
    let mut bearings = head + "window_id,category,sector,sector_start_deg,count\n";
    let centroids: Vec<GeoPoint> = seq
        .node_ids
        .iter()
        .map(|id| {
            partition
                .get(id)
                .map(|r| r.centroid())
                .ok_or_else(|| CliError::from(MetricsError::UnknownNode(id.clone())))
        })
        .collect::<Result<_>>()?;

    for w in &seq.windows {
        let bins = match edge_quantile_categories(w, a.bins) {
            Ok(b) => b,
            Err(e @ MetricsError::TooFewEdges { .. }) => {
                log::warn!("window {}: skipped: {e}", w.window_id);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let hist = bearing_histogram(w, &partition, &bins, a.sectors)?;
        // categories are printed 1-based, 1 = weakest
        for c in 0..a.bins {
            let edges: Vec<(usize, usize)> = bins
                .categories
                .iter()
                .filter(|(_, &k)| k == c)
                .map(|(&e, _)| e)
                .collect();
            let weights: Vec<f64> = edges.iter().map(|&(i, j)| w.weight(i, j)).collect();
            let lo = weights.iter().copied().reduce(f64::min);
            let hi = weights.iter().copied().reduce(f64::max);
            let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            writeln!(classes, "{},{},{},{},{}", w.window_id, c + 1, edges.len(), cell(lo), cell(hi)).unwrap();

            let mut d = Vec::with_capacity(edges.len());
            for &(i, j) in &edges {
                let km = haversine_km(&centroids[i], &centroids[j]);
                d.push(km);
                writeln!(distances, "{},{},{},{},{}", w.window_id, c + 1, seq.node_ids[i], seq.node_ids[j], fmt_f64(km))
                    .unwrap();
            }
            match five_number_summary(&d) {
                Some(f) => writeln!(
                    summary,
                    "{},{},{},{},{},{},{},{}",
                    w.window_id,
                    c + 1,
                    d.len(),
                    fmt_f64(f.min),
                    fmt_f64(f.q1),
                    fmt_f64(f.median),
                    fmt_f64(f.q3),
                    fmt_f64(f.max)
                ),
                None => writeln!(summary, "{},{},0,,,,,", w.window_id, c + 1),
            }
            .unwrap();
            for (k, count) in hist[c].iter().enumerate() {
                writeln!(
                    bearings,
                    "{},{},{},{},{}",
                    w.window_id,
                    c + 1,
                    k,
                    fmt_f64(sector_start_deg(k, a.sectors)),
                    count
                )
                .unwrap();
            }
        }
    }
    emit(Some(&dir.join("classes.csv")), classes.as_bytes())?;
    emit(Some(&dir.join("distances.csv")), distances.as_bytes())?;
    emit(Some(&dir.join("distance_summary.csv")), summary.as_bytes())?;
    emit(Some(&dir.join("bearings.csv")), bearings.as_bytes())
}
