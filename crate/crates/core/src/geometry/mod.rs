//! Geometric kernel on raw longitude/latitude coordinates.
//!
//! Topology (inclusion, edge intersection) is evaluated in the lon-lat plane,
//! while every metric quantity (lengths, areas, bearings) is computed on a
//! sphere of radius [`EARTH_RADIUS_KM`].

mod clip;
mod partition;

pub use clip::{clip_pieces, clip_polyline, ClipPiece, SubSegment};
pub use partition::{buffer_partition, grid_partition, Partition};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Kilometres per degree of arc on the reference sphere.
pub const KM_PER_DEG: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid point (lon={lon}, lat={lat})")]
    InvalidPoint { lon: f64, lat: f64 },
    #[error("region {region}: {reason}")]
    InvalidRing { region: String, reason: String },
    #[error("region {0} crosses the antimeridian")]
    AntimeridianCrossing(String),
    #[error("duplicate region id {0}")]
    DuplicateRegionId(String),
    #[error("regions {a} and {b} overlap (intersection area {area:e} deg^2)")]
    OverlappingRegions { a: String, b: String, area: f64 },
    #[error("fixes {index} and {next} share a timestamp", next = .index + 1)]
    DegenerateSegment { index: usize },
    #[error("polyline needs at least two fixes")]
    TooFewFixes,
    #[error("bearing undefined between coincident points")]
    CoincidentPoints,
    #[error("rejection sampling stalled in region {region} (acceptance rate {rate:e})")]
    SamplingStalled { region: String, rate: f64 },
    #[error("invalid GeoJSON: {0}")]
    InvalidGeoJson(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// A position on the Earth surface with an optional altitude in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
    pub alt: Option<f64>,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        let p = GeoPoint { lon, lat, alt: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_alt(lon: f64, lat: f64, alt: f64) -> Result<Self> {
        let p = GeoPoint {
            lon,
            lat,
            alt: Some(alt),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
            && self.alt.is_none_or(f64::is_finite);
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidPoint {
                lon: self.lon,
                lat: self.lat,
            })
        }
    }

    pub(crate) fn xy(&self) -> [f64; 2] {
        [self.lon, self.lat]
    }

    /// Linear interpolation in (lon, lat, alt); altitude is kept only when
    /// both ends carry one.
    pub fn lerp(&self, other: &GeoPoint, u: f64) -> GeoPoint {
        let alt = match (self.alt, other.alt) {
            (Some(a), Some(b)) => Some(a + (b - a) * u),
            _ => None,
        };
        GeoPoint {
            lon: self.lon + (other.lon - self.lon) * u,
            lat: self.lat + (other.lat - self.lat) * u,
            alt,
        }
    }
}

/// Axis-aligned bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a [f64; 2]>) -> Option<BBox> {
        let mut it = pts.into_iter();
        let first = it.next()?;
        let mut b = BBox {
            min: *first,
            max: *first,
        };
        for p in it {
            b.expand(*p);
        }
        Some(b)
    }

    pub fn expand(&mut self, p: [f64; 2]) {
        for k in 0..2 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min[0] <= other.max[0]
            && other.min[0] <= self.max[0]
            && self.min[1] <= other.max[1]
            && other.min[1] <= self.max[1]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// A polygonal node: one exterior ring plus optional holes, stored open
/// (the closing vertex is not repeated).
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    id: String,
    exterior: Vec<[f64; 2]>,
    holes: Vec<Vec<[f64; 2]>>,
    centroid: GeoPoint,
    bbox: BBox,
    area_deg2: f64,
    area_km2: f64,
}

impl Region {
    /// Builds and validates a region. Rings may be given closed or open.
    pub fn new(
        id: impl Into<String>,
        exterior: Vec<[f64; 2]>,
        holes: Vec<Vec<[f64; 2]>>,
    ) -> Result<Region> {
        let id = id.into();
        let exterior = normalize_ring(&id, exterior)?;
        let holes = holes
            .into_iter()
            .map(|h| normalize_ring(&id, h))
            .collect::<Result<Vec<_>>>()?;

        for ring in std::iter::once(&exterior).chain(holes.iter()) {
            check_simple(&id, ring)?;
        }
        let ext_area = signed_area(&exterior);
        if ext_area.abs() <= f64::EPSILON {
            return Err(GeometryError::InvalidRing {
                region: id,
                reason: "exterior ring has zero area".into(),
            });
        }
        for hole in &holes {
            if !ring_contains(&exterior, hole[0]) {
                return Err(GeometryError::InvalidRing {
                    region: id,
                    reason: "hole lies outside the exterior ring".into(),
                });
            }
        }

        let area_deg2 = ext_area.abs() - holes.iter().map(|h| signed_area(h).abs()).sum::<f64>();
        let area_km2 = spherical_ring_area(&exterior)
            - holes.iter().map(|h| spherical_ring_area(h)).sum::<f64>();

        // area-weighted centroid with holes subtracted
        let (cx, cy, a) = std::iter::once((&exterior, 1.0))
            .chain(holes.iter().map(|h| (h, -1.0)))
            .fold((0.0, 0.0, 0.0), |(sx, sy, sa), (ring, sign)| {
                let a = signed_area(ring);
                let [x, y] = ring_centroid(ring);
                let w = sign * a.abs();
                (sx + w * x, sy + w * y, sa + w)
            });
        let centroid = GeoPoint {
            lon: cx / a,
            lat: cy / a,
            alt: None,
        };
        let bbox = BBox::from_points(exterior.iter()).expect("ring has vertices");

        Ok(Region {
            id,
            exterior,
            holes,
            centroid,
            bbox,
            area_deg2,
            area_km2,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn exterior(&self) -> &[[f64; 2]] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<[f64; 2]>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[[f64; 2]]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn centroid(&self) -> GeoPoint {
        self.centroid
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Planar area in squared degrees.
    pub fn area_deg2(&self) -> f64 {
        self.area_deg2
    }

    /// Area on the reference sphere.
    pub fn area_km2(&self) -> f64 {
        self.area_km2
    }

    pub fn is_convex(&self) -> bool {
        if !self.holes.is_empty() {
            return false;
        }
        let n = self.exterior.len();
        let mut sign = 0.0;
        for i in 0..n {
            let a = self.exterior[i];
            let b = self.exterior[(i + 1) % n];
            let c = self.exterior[(i + 2) % n];
            let z = cross(sub(b, a), sub(c, b));
            if z != 0.0 {
                if sign != 0.0 && z.signum() != sign {
                    return false;
                }
                sign = z.signum();
            }
        }
        true
    }

    fn contains_xy(&self, p: [f64; 2]) -> bool {
        if !(self.bbox.min[0] <= p[0]
            && p[0] <= self.bbox.max[0]
            && self.bbox.min[1] <= p[1]
            && p[1] <= self.bbox.max[1])
        {
            return false;
        }
        if self.rings().any(|r| on_ring_boundary(r, p)) {
            return true;
        }
        let mut inside = false;
        for ring in self.rings() {
            if ring_contains(ring, p) {
                inside = !inside;
            }
        }
        inside
    }
}

/// Closed-region membership: boundary points count as inside; holes are
/// handled with the even-odd rule.
pub fn point_in_region(p: &GeoPoint, r: &Region) -> bool {
    r.contains_xy(p.xy())
}

/// Great-circle distance on the reference sphere.
pub fn haversine_km(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = p2 - p1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Great-circle initial bearing in degrees, clockwise from north, in `[0, 360)`.
pub fn initial_bearing_deg(a: &GeoPoint, b: &GeoPoint) -> Result<f64> {
    if a.lon == b.lon && a.lat == b.lat {
        return Err(GeometryError::CoincidentPoints);
    }
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    let deg = y.atan2(x).to_degrees().rem_euclid(360.0);
    // rem_euclid can round up to exactly 360
    Ok(if deg >= 360.0 { 0.0 } else { deg })
}

/// Point reached after travelling `dist_km` from `start` along the great
/// circle with initial bearing `bearing_deg`.
pub fn destination_point(start: &GeoPoint, bearing_deg: f64, dist_km: f64) -> GeoPoint {
    let d = dist_km / EARTH_RADIUS_KM;
    let th = bearing_deg.to_radians();
    let p1 = start.lat.to_radians();
    let l1 = start.lon.to_radians();
    let p2 = (p1.sin() * d.cos() + p1.cos() * d.sin() * th.cos()).asin();
    let l2 = l1 + (th.sin() * d.sin() * p1.cos()).atan2(d.cos() - p1.sin() * p2.sin());
    let lon = (l2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint {
        lon,
        lat: p2.to_degrees(),
        alt: None,
    }
}

/// Draws `n` points uniformly (in lon-lat) inside `r` by rejection from its
/// bounding box. Deterministic given `seed`.
pub fn sample_points(r: &Region, n: usize, seed: u64) -> Result<Vec<GeoPoint>> {
    if n == 0 {
        return Err(GeometryError::InvalidArgument("n must be >= 1".into()));
    }
    let bb = r.bbox();
    let rate = r.area_deg2() / (bb.width() * bb.height());
    if !(rate >= 1e-6) {
        return Err(GeometryError::SamplingStalled {
            region: r.id().to_string(),
            rate,
        });
    }
    let max_attempts = ((n as f64 / 1e-6).min(1e12)) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while out.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(GeometryError::SamplingStalled {
                region: r.id().to_string(),
                rate: out.len() as f64 / attempts as f64,
            });
        }
        let p = [
            bb.min[0] + rng.random::<f64>() * bb.width(),
            bb.min[1] + rng.random::<f64>() * bb.height(),
        ];
        if r.contains_xy(p) {
            out.push(GeoPoint {
                lon: p[0],
                lat: p[1],
                alt: None,
            });
        }
    }
    Ok(out)
}

/// Per-region arrival-point counts, linear in area and clamped to `[min, max]`.
pub fn allocate_samples(
    partition: &Partition,
    min: usize,
    max: usize,
) -> Result<BTreeMap<String, usize>> {
    if min < 1 || max < min {
        return Err(GeometryError::InvalidArgument(format!(
            "need 1 <= min <= max, got ({min}, {max})"
        )));
    }
    let max_area = partition
        .regions()
        .iter()
        .map(Region::area_km2)
        .fold(0.0, f64::max);
    Ok(partition
        .regions()
        .iter()
        .map(|r| {
            let ratio = if max_area > 0.0 {
                r.area_km2() / max_area
            } else {
                0.0
            };
            let c = (min as f64 + (max - min) as f64 * ratio).round();
            let c = (c as usize).clamp(min, max);
            (r.id().to_string(), c)
        })
        .collect())
}

pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| cross(ring[i], ring[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

fn ring_centroid(ring: &[[f64; 2]]) -> [f64; 2] {
    let n = ring.len();
    let o = ring[0];
    let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = sub(ring[i], o);
        let q = sub(ring[(i + 1) % n], o);
        let c = cross(p, q);
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
        a2 += c;
    }
    [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
}

/// Area of a lon-lat ring on the reference sphere (edges treated as
/// rhumb-like segments, accurate for regional polygons).
fn spherical_ring_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    let s: f64 = (0..n)
        .map(|i| {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            (b[0] - a[0]).to_radians()
                * (2.0 + a[1].to_radians().sin() + b[1].to_radians().sin())
        })
        .sum();
    (s * EARTH_RADIUS_KM * EARTH_RADIUS_KM / 2.0).abs()
}

fn normalize_ring(id: &str, ring: Vec<[f64; 2]>) -> Result<Vec<[f64; 2]>> {
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(ring.len());
    for p in ring {
        GeoPoint::new(p[0], p[1]).map_err(|_| GeometryError::InvalidRing {
            region: id.to_string(),
            reason: format!("vertex ({}, {}) out of range", p[0], p[1]),
        })?;
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 {
        return Err(GeometryError::InvalidRing {
            region: id.to_string(),
            reason: "ring needs at least 3 distinct vertices".into(),
        });
    }
    let n = out.len();
    if (0..n).any(|i| (out[(i + 1) % n][0] - out[i][0]).abs() > 180.0) {
        return Err(GeometryError::AntimeridianCrossing(id.to_string()));
    }
    Ok(out)
}

fn check_simple(id: &str, ring: &[[f64; 2]]) -> Result<()> {
    let n = ring.len();
    let bad = |reason: &str| GeometryError::InvalidRing {
        region: id.to_string(),
        reason: reason.to_string(),
    };
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        // spike: next edge folds back onto this one
        let c = ring[(i + 2) % n];
        if cross(sub(b, a), sub(c, b)) == 0.0 && dot(sub(b, a), sub(c, b)) < 0.0 {
            return Err(bad("ring folds back on itself"));
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let c = ring[j];
            let d = ring[(j + 1) % n];
            if segments_touch(a, b, c, d) {
                return Err(bad("ring is self-intersecting"));
            }
        }
    }
    Ok(())
}

fn segments_touch(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let o1 = cross(sub(b, a), sub(c, a));
    let o2 = cross(sub(b, a), sub(d, a));
    let o3 = cross(sub(d, c), sub(a, c));
    let o4 = cross(sub(d, c), sub(b, c));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && within_box(a, b, c))
        || (o2 == 0.0 && within_box(a, b, d))
        || (o3 == 0.0 && within_box(c, d, a))
        || (o4 == 0.0 && within_box(c, d, b))
}

fn within_box(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    a[0].min(b[0]) <= p[0]
        && p[0] <= a[0].max(b[0])
        && a[1].min(b[1]) <= p[1]
        && p[1] <= a[1].max(b[1])
}

pub(crate) fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    let e = sub(b, a);
    let len = dot(e, e).sqrt();
    if len == 0.0 {
        return p == a;
    }
    let dist = cross(e, sub(p, a)).abs() / len;
    if dist > BOUNDARY_EPS {
        return false;
    }
    let t = dot(sub(p, a), e) / (len * len);
    (-BOUNDARY_EPS..=1.0 + BOUNDARY_EPS).contains(&t)
}

fn on_ring_boundary(ring: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = ring.len();
    (0..n).any(|i| on_segment(ring[i], ring[(i + 1) % n], p))
}

/// Crossing-number test (half-open rule) for a single ring.
fn ring_contains(ring: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
