use super::{
    destination_point, BBox, GeoPoint, GeometryError, Region, Result, KM_PER_DEG,
};
use geo::{Area, BooleanOps};
use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::path::Path;

/// Interiors may share at most this much area (deg²) before two regions are
/// considered overlapping.
pub const OVERLAP_TOLERANCE_DEG2: f64 = 1e-9;

type IndexedBox = GeomWithData<Rectangle<[f64; 2]>, usize>;

/// An ordered collection of pairwise-disjoint regions with a bounding-box
/// R-tree for candidate lookups.
#[derive(Debug, Clone)]
pub struct Partition {
    regions: Vec<Region>,
    by_id: HashMap<String, usize>,
    tree: RTree<IndexedBox>,
}

impl Partition {
    pub fn new(regions: Vec<Region>) -> Result<Partition> {
        let mut by_id = HashMap::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            if by_id.insert(r.id().to_string(), i).is_some() {
                return Err(GeometryError::DuplicateRegionId(r.id().to_string()));
            }
        }
        let tree = RTree::bulk_load(
            regions
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let b = r.bbox();
                    GeomWithData::new(Rectangle::from_corners(b.min, b.max), i)
                })
                .collect(),
        );
        let p = Partition {
            regions,
            by_id,
            tree,
        };
        p.check_disjoint()?;
        Ok(p)
    }

    fn check_disjoint(&self) -> Result<()> {
        let polys: Vec<geo::Polygon<f64>> = self.regions.iter().map(to_geo).collect();
        for (i, r) in self.regions.iter().enumerate() {
            let mut others: Vec<usize> = self
                .candidates(&r.bbox())
                .filter(|&j| j > i)
                .collect();
            others.sort_unstable();
            for j in others {
                let area = polys[i].intersection(&polys[j]).unsigned_area();
                if area > OVERLAP_TOLERANCE_DEG2 {
                    let (a, b) = (r.id().to_string(), self.regions[j].id().to_string());
                    return Err(GeometryError::OverlappingRegions { a, b, area });
                }
            }
        }
        Ok(())
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Region> {
        self.index_of(id).map(|i| &self.regions[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Indices of regions whose bounding box meets `bbox`, in no particular order.
    pub fn candidates<'a>(&'a self, bbox: &BBox) -> impl Iterator<Item = usize> + 'a {
        self.tree
            .locate_in_envelope_intersecting(&AABB::from_corners(bbox.min, bbox.max))
            .map(|g| g.data)
    }

    /// All regions containing `p` (more than one only on shared boundaries),
    /// sorted by region id.
    pub fn locate_all(&self, p: &GeoPoint) -> Vec<usize> {
        let mut hits: Vec<usize> = self
            .tree
            .locate_all_at_point(&p.xy())
            .map(|g| g.data)
            .filter(|&i| self.regions[i].contains_xy(p.xy()))
            .collect();
        hits.sort_by(|&a, &b| self.regions[a].id().cmp(self.regions[b].id()));
        hits
    }

    pub fn from_geojson_str(text: &str) -> Result<Partition> {
        let bad = |m: &str| GeometryError::InvalidGeoJson(m.to_string());
        let v: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
        if v.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(bad("top-level object must be a FeatureCollection"));
        }
        let features = v
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing features array"))?;
        let mut regions = Vec::with_capacity(features.len());
        for (k, f) in features.iter().enumerate() {
            let id = match f.pointer("/properties/id") {
                Some(Value::String(s)) => s.clone(),
                _ => return Err(bad(&format!("feature {k}: missing string property \"id\""))),
            };
            let geom = f
                .get("geometry")
                .ok_or_else(|| bad(&format!("feature {id}: missing geometry")))?;
            if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
                return Err(bad(&format!("feature {id}: geometry must be a Polygon")));
            }
            let rings = geom
                .get("coordinates")
                .and_then(Value::as_array)
                .ok_or_else(|| bad(&format!("feature {id}: missing coordinates")))?;
            let mut parsed = rings
                .iter()
                .map(|ring| parse_ring(ring).ok_or_else(|| bad(&format!("feature {id}: bad ring"))))
                .collect::<Result<Vec<_>>>()?;
            if parsed.is_empty() {
                return Err(bad(&format!("feature {id}: polygon has no rings")));
            }
            let exterior = parsed.remove(0);
            regions.push(Region::new(id, exterior, parsed)?);
        }
        Partition::new(regions)
    }

    pub fn from_geojson_path(path: &Path) -> Result<Partition> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            GeometryError::InvalidGeoJson(format!("{}: {e}", path.display()))
        })?;
        Partition::from_geojson_str(&text)
    }

    /// GeoJSON FeatureCollection with closed rings and an `id` property.
    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .regions
            .iter()
            .map(|r| {
                let rings: Vec<Value> = r
                    .rings()
                    .map(|ring| {
                        let mut pts: Vec<Value> = ring.iter().map(|p| json!([p[0], p[1]])).collect();
                        pts.push(json!([ring[0][0], ring[0][1]]));
                        Value::Array(pts)
                    })
                    .collect();
                json!({
                    "type": "Feature",
                    "properties": { "id": r.id() },
                    "geometry": { "type": "Polygon", "coordinates": rings },
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

fn parse_ring(v: &Value) -> Option<Vec<[f64; 2]>> {
    v.as_array()?
        .iter()
        .map(|p| {
            let a = p.as_array()?;
            Some([a.first()?.as_f64()?, a.get(1)?.as_f64()?])
        })
        .collect()
}

fn to_geo(r: &Region) -> geo::Polygon<f64> {
    let ring = |pts: &[[f64; 2]]| {
        geo::LineString::from(pts.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())
    };
    geo::Polygon::new(
        ring(r.exterior()),
        r.holes().iter().map(|h| ring(h)).collect(),
    )
}

/// Regular grid of roughly `cell_km`-sized cells over a lon-lat box. The
/// longitude step is set at the box's mid latitude so cells stay aligned.
/// With a mask, only cells whose centroid falls in a mask region are kept.
pub fn grid_partition(
    lon0: f64,
    lat0: f64,
    lon1: f64,
    lat1: f64,
    cell_km: f64,
    mask: Option<&Partition>,
) -> Result<Partition> {
    if !(cell_km > 0.0) || !(lon1 > lon0) || !(lat1 > lat0) {
        return Err(GeometryError::InvalidArgument(format!(
            "grid needs lon0<lon1, lat0<lat1, cell_km>0; got {lon0},{lat0},{lon1},{lat1},{cell_km}"
        )));
    }
    GeoPoint::new(lon0, lat0)?;
    GeoPoint::new(lon1, lat1)?;
    let dlat = cell_km / KM_PER_DEG;
    let dlon = dlat / ((lat0 + lat1) / 2.0).to_radians().cos();
    let rows = ((lat1 - lat0) / dlat - 1e-9).ceil().max(1.0) as usize;
    let cols = ((lon1 - lon0) / dlon - 1e-9).ceil().max(1.0) as usize;
    let mut regions = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            let x0 = lon0 + col as f64 * dlon;
            let y0 = lat0 + row as f64 * dlat;
            let (x1, y1) = ((x0 + dlon).min(180.0), (y0 + dlat).min(90.0));
            let r = Region::new(
                format!("g{row:03}_{col:03}"),
                vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
                vec![],
            )?;
            if mask.is_none_or(|m| !m.locate_all(&r.centroid()).is_empty()) {
                regions.push(r);
            }
        }
    }
    Partition::new(regions)
}

/// Geodesic circles approximated by `n_vertices`-gons around each centre.
pub fn buffer_partition(
    centers: &[(String, GeoPoint)],
    radius_km: f64,
    n_vertices: usize,
) -> Result<Partition> {
    if !(radius_km > 0.0) || n_vertices < 3 {
        return Err(GeometryError::InvalidArgument(format!(
            "buffers need radius > 0 and >= 3 vertices; got {radius_km}, {n_vertices}"
        )));
    }
    let regions = centers
        .iter()
        .map(|(id, c)| {
            c.validate()?;
            // counter-clockwise: decreasing bearings
            let ring = (0..n_vertices)
                .map(|k| {
                    let p = destination_point(c, -(k as f64) * 360.0 / n_vertices as f64, radius_km);
                    [p.lon, p.lat]
                })
                .collect();
            Region::new(id.clone(), ring, vec![])
        })
        .collect::<Result<Vec<_>>>()?;
    Partition::new(regions)
}
