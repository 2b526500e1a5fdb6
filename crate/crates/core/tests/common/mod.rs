//! Fixture builders and brute-force reference implementations shared by
//! the integration tests. Nothing here calls into the code under test
//! except to build its input types.

#![allow(dead_code)]

use aeronet::geometry::{GeoPoint, Region};
use aeronet::network::WindowedAdjacency;
use aeronet::trajectory::{Fix, TrajectorySegment};
use rand::Rng;
use std::sync::Arc;

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

pub fn haversine(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (p1, p2) = (a[1].to_radians(), b[1].to_radians());
    let dp = p2 - p1;
    let dl = (b[0] - a[0]).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Forward segment through `pts` (lon, lat), one fix every `dt` seconds.
pub fn segment(id: &str, pts: &[[f64; 2]], t0: i64, dt: i64) -> TrajectorySegment {
    let fixes = pts
        .iter()
        .enumerate()
        .map(|(k, p)| Fix {
            time: t0 + k as i64 * dt,
            point: GeoPoint::new(p[0], p[1]).unwrap(),
            cov: vec![],
        })
        .collect();
    TrajectorySegment::new(id, t0, None, fixes, Arc::from(Vec::<String>::new())).unwrap()
}

pub fn rect(id: &str, lon0: f64, lat0: f64, lon1: f64, lat1: f64) -> Region {
    Region::new(id, vec![[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1]], vec![]).unwrap()
}

/// Random convex polygon: sorted angles on a circle, counter-clockwise.
pub fn random_convex<R: Rng>(rng: &mut R, center: [f64; 2], radius: f64) -> Vec<[f64; 2]> {
    let k = rng.random_range(3..9);
    let mut angles: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    if angles.len() < 3 {
        angles = vec![0.0, 2.0, 4.0];
    }
    angles
        .iter()
        .map(|a| [center[0] + radius * a.cos(), center[1] + radius * a.sin()])
        .collect()
}

/// Strictly-left test against every edge of a counter-clockwise ring.
pub fn inside_convex(ring: &[[f64; 2]], p: [f64; 2]) -> bool {
    (0..ring.len()).all(|i| {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 0.0
    })
}

/// Position at time `t` by linear interpolation in lon-lat.
pub fn position(seg: &TrajectorySegment, t: f64) -> [f64; 2] {
    let f = &seg.fixes;
    let k = f
        .windows(2)
        .position(|w| t <= w[1].time as f64)
        .unwrap_or(f.len() - 2);
    let (a, b) = (&f[k], &f[k + 1]);
    let u = (t - a.time as f64) / (b.time - a.time) as f64;
    [
        a.point.lon + u * (b.point.lon - a.point.lon),
        a.point.lat + u * (b.point.lat - a.point.lat),
    ]
}

/// Duration (s) and length (km) inside a convex ring from `n` uniform
/// time samples; a sample interval counts when its midpoint is inside.
pub fn dense_duration_length(seg: &TrajectorySegment, ring: &[[f64; 2]], n: usize) -> (f64, f64) {
    let t0 = seg.fixes[0].time as f64;
    let t1 = seg.fixes[seg.fixes.len() - 1].time as f64;
    let dt = (t1 - t0) / n as f64;
    let mut dur = 0.0;
    let mut len = 0.0;
    let mut prev = position(seg, t0);
    for k in 0..n {
        let next = position(seg, t0 + (k + 1) as f64 * dt);
        if inside_convex(ring, position(seg, t0 + (k as f64 + 0.5) * dt)) {
            dur += dt;
            len += haversine(prev, next);
        }
        prev = next;
    }
    (dur, len)
}

pub fn polyline_length(seg: &TrajectorySegment) -> f64 {
    seg.fixes
        .windows(2)
        .map(|w| haversine([w[0].point.lon, w[0].point.lat], [w[1].point.lon, w[1].point.lat]))
        .sum()
}

pub fn node_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

pub fn graph(m: &[Vec<f64>]) -> WindowedAdjacency {
    let ids = node_ids(m.len());
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    WindowedAdjacency::from_dense("g", &refs, m)
}

/// Minimum simple-path cost for every ordered pair by exhaustive path
/// enumeration.
pub fn brute_distances(m: &[Vec<f64>], direct: bool) -> Vec<Vec<Option<f64>>> {
    let n = m.len();
    let cost = |i: usize, j: usize| if direct { m[i][j] } else { 1.0 / m[i][j] };
    fn walk(
        u: usize,
        acc: f64,
        seen: &mut Vec<bool>,
        best: &mut [Option<f64>],
        m: &[Vec<f64>],
        cost: &dyn Fn(usize, usize) -> f64,
    ) {
        for v in 0..m.len() {
            if m[u][v] > 0.0 && !seen[v] {
                let c = acc + cost(u, v);
                if best[v].is_none_or(|b| c < b) {
                    best[v] = Some(c);
                }
                seen[v] = true;
                walk(v, c, seen, best, m, cost);
                seen[v] = false;
            }
        }
    }
    (0..n)
        .map(|s| {
            let mut best = vec![None; n];
            let mut seen = vec![false; n];
            seen[s] = true;
            walk(s, 0.0, &mut seen, &mut best, m, &cost);
            best[s] = None;
            best
        })
        .collect()
}

/// (mean, population sd, max, unreachable pairs) over off-diagonal pairs.
pub fn brute_path_stats(m: &[Vec<f64>], direct: bool) -> Option<(f64, f64, f64, usize)> {
    let d = brute_distances(m, direct);
    let n = m.len();
    let vals: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .filter_map(|(i, j)| d[i][j])
        .collect();
    if vals.is_empty() {
        return None;
    }
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k).sqrt();
    let max = vals.iter().copied().fold(f64::MIN, f64::max);
    Some((mean, sd, max, n * (n - 1) - vals.len()))
}

/// Triplet-value clustering on max-symmetrised weights, enumerating all
/// ordered (centre, end, end) triples.
pub fn brute_transitivity(m: &[Vec<f64>]) -> Option<f64> {
    let n = m.len();
    let s = |i: usize, j: usize| m[i][j].max(m[j][i]);
    let (mut closed, mut total) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || i == k || j >= k || s(i, j) <= 0.0 || s(i, k) <= 0.0 {
                    continue;
                }
                let v = (s(i, j) + s(i, k)) / 2.0;
                total += v;
                if s(j, k) > 0.0 {
                    closed += v;
                }
            }
        }
    }
    (total > 0.0).then(|| closed / total)
}

/// Naive complete linkage: recompute every cluster distance from points at
/// every step. Returns (merged member sets, height) in merge order; ties go
/// to the pair with the smallest (min label, min label).
pub fn brute_complete_linkage(pts: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut clusters: Vec<Vec<usize>> = (0..pts.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let h = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| d(&pts[i], &pts[j]))
                    .fold(0.0, f64::max);
                let ka = *clusters[a].iter().min().unwrap();
                let kb = *clusters[b].iter().min().unwrap();
                let key = (ka.min(kb), ka.max(kb));
                if best.is_none_or(|(bh, bk, _, _)| h < bh || (h == bh && key < bk)) {
                    best = Some((h, key, a, b));
                }
            }
        }
        let (h, _, a, b) = best.unwrap();
        let mut merged = clusters[a].clone();
        merged.extend(&clusters[b]);
        merged.sort();
        clusters.remove(b);
        clusters.remove(a);
        clusters.push(merged.clone());
        out.push((merged, h));
    }
    out
}
