use super::{cross, dot, haversine_km, sub, GeoPoint, GeometryError, Region, Result};

const PARAM_EPS: f64 = 1e-12;

/// A maximal time interval during which the interpolated path lies in the
/// region. Degenerate intervals (`t_enter == t_exit`) record single-point
/// contacts such as a tangential touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubSegment {
    pub t_enter: f64,
    pub t_exit: f64,
    pub length_km: f64,
}

/// Inside portion of one polyline leg: `leg` is the index of the first fix,
/// `[u0, u1]` the fraction of the leg that lies inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipPiece {
    pub leg: usize,
    pub u0: f64,
    pub u1: f64,
}

impl ClipPiece {
    fn start(&self) -> f64 {
        self.leg as f64 + self.u0
    }

    fn end(&self) -> f64 {
        self.leg as f64 + self.u1
    }
}

/// Clips a time-stamped polyline against a region. Returns maximal inside
/// intervals, each as the ordered list of leg pieces it is made of.
pub fn clip_pieces(points: &[(f64, GeoPoint)], r: &Region) -> Result<Vec<Vec<ClipPiece>>> {
    if points.len() < 2 {
        return Err(GeometryError::TooFewFixes);
    }
    if let Some(index) = points.windows(2).position(|w| w[0].0 == w[1].0) {
        return Err(GeometryError::DegenerateSegment { index });
    }

    let bb = r.bbox();
    let mut pieces = Vec::new();
    let mut params = Vec::new();
    for (leg, w) in points.windows(2).enumerate() {
        let p0 = w[0].1.xy();
        let p1 = w[1].1.xy();
        let seg_box = super::BBox::from_points([&p0, &p1]).unwrap();
        if !seg_box.intersects(&bb) {
            continue;
        }
        params.clear();
        params.push(0.0);
        params.push(1.0);
        let d = sub(p1, p0);
        let dd = dot(d, d);
        if dd > 0.0 {
            for ring in r.rings() {
                edge_params(ring, p0, d, dd, &mut params);
            }
        }
        params.sort_by(f64::total_cmp);
        params.dedup_by(|a, b| (*a - *b).abs() <= PARAM_EPS);

        let at = |u: f64| [p0[0] + d[0] * u, p0[1] + d[1] * u];
        for (k, &u) in params.iter().enumerate() {
            if r.contains_xy(at(u)) {
                pieces.push(ClipPiece { leg, u0: u, u1: u });
            }
            if let Some(&v) = params.get(k + 1) {
                if r.contains_xy(at(0.5 * (u + v))) {
                    pieces.push(ClipPiece { leg, u0: u, u1: v });
                }
            }
        }
    }

    let mut out: Vec<Vec<ClipPiece>> = Vec::new();
    let mut cur: Vec<ClipPiece> = Vec::new();
    for piece in pieces {
        let Some(last) = cur.last_mut() else {
            cur.push(piece);
            continue;
        };
        if piece.start() > last.end() + PARAM_EPS {
            out.push(std::mem::take(&mut cur));
            cur.push(piece);
        } else if piece.end() > last.end() {
            if piece.leg == last.leg {
                last.u1 = piece.u1;
            } else {
                cur.push(piece);
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

/// Leg parameters `u ∈ [0, 1]` where the leg `p0 + u·d` meets ring edges.
fn edge_params(ring: &[[f64; 2]], p0: [f64; 2], d: [f64; 2], dd: f64, params: &mut Vec<f64>) {
    let n = ring.len();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let e = sub(b, a);
        let ap = sub(a, p0);
        let denom = cross(d, e);
        if denom != 0.0 {
            let u = cross(ap, e) / denom;
            let v = cross(ap, d) / denom;
            if (-PARAM_EPS..=1.0 + PARAM_EPS).contains(&v) && (0.0..=1.0).contains(&u) {
                params.push(u);
            }
        } else if cross(ap, d) == 0.0 {
            // collinear overlap: the overlap's ends are the edge endpoints
            for q in [a, b] {
                let u = dot(sub(q, p0), d) / dd;
                if (0.0..=1.0).contains(&u) {
                    params.push(u);
                }
            }
        }
    }
}

fn piece_length(points: &[(f64, GeoPoint)], p: &ClipPiece) -> f64 {
    if p.u1 <= p.u0 {
        return 0.0;
    }
    let (a, b) = (&points[p.leg].1, &points[p.leg + 1].1);
    haversine_km(&a.lerp(b, p.u0), &a.lerp(b, p.u1))
}

fn piece_time(points: &[(f64, GeoPoint)], leg: usize, u: f64) -> f64 {
    let (t0, t1) = (points[leg].0, points[leg + 1].0);
    t0 + (t1 - t0) * u
}

/// Maximal sub-intervals during which the linearly interpolated path lies
/// inside `r`, with crossing times and haversine lengths.
pub fn clip_polyline(points: &[(f64, GeoPoint)], r: &Region) -> Result<Vec<SubSegment>> {
    Ok(clip_pieces(points, r)?
        .iter()
        .map(|run| {
            let first = run.first().expect("runs are non-empty");
            let last = run.last().expect("runs are non-empty");
            SubSegment {
                t_enter: piece_time(points, first.leg, first.u0),
                t_exit: piece_time(points, last.leg, last.u1),
                length_km: run.iter().map(|p| piece_length(points, p)).sum(),
            }
        })
        .collect())
}
