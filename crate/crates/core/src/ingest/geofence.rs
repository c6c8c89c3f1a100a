use serde_json::Value;

use super::IngestError;
use crate::geo::valid_coordinates;

/// Closed polygon ring delimiting one zone, in (lat, lon) degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct Geofence {
    ring: Vec<(f64, f64)>,
    zone_name: String,
}

fn geometry(msg: impl Into<String>) -> IngestError {
    IngestError::Geometry(msg.into())
}

// Orientation of the triangle (a, b, c) in the (lon, lat) plane.
fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.1 - a.1) * (c.0 - a.0) - (b.0 - a.0) * (c.1 - a.1)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

impl Geofence {
    /// Builds a fence from (lat, lon) vertices. The ring is closed if the
    /// last vertex does not repeat the first.
    pub fn new(vertices: Vec<(f64, f64)>, zone_name: impl Into<String>) -> Result<Self, IngestError> {
        let mut ring = vertices;
        if ring.len() >= 2 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(geometry(format!("a fence needs at least 3 vertices, got {}", ring.len())));
        }
        if let Some(&(lat, lon)) = ring.iter().find(|(lat, lon)| !valid_coordinates(*lat, *lon)) {
            return Err(geometry(format!("vertex ({lat}, {lon}) out of range")));
        }
        let n = ring.len();
        let area2: f64 = (0..n)
            .map(|i| {
                let (a, b) = (ring[i], ring[(i + 1) % n]);
                a.1 * b.0 - b.1 * a.0
            })
            .sum();
        if area2 == 0.0 {
            return Err(geometry("polygon has zero area"));
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                    return Err(geometry(format!("edges {i} and {j} intersect")));
                }
            }
        }
        let first = ring[0];
        ring.push(first);
        Ok(Self { ring, zone_name: zone_name.into() })
    }

    /// Parses a GeoJSON `Feature` with a `Polygon` geometry (outer ring only)
    /// and a `zone_name` property.
    pub fn from_geojson(text: &str) -> Result<Self, IngestError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| geometry(format!("invalid GeoJSON: {e}")))?;
        if doc["type"] != "Feature" {
            return Err(geometry("expected a GeoJSON Feature"));
        }
        let zone = doc["properties"]["zone_name"]
            .as_str()
            .ok_or_else(|| geometry("missing string property \"zone_name\""))?;
        let geom = &doc["geometry"];
        if geom["type"] != "Polygon" {
            return Err(geometry("expected a Polygon geometry"));
        }
        let outer = geom["coordinates"][0]
            .as_array()
            .ok_or_else(|| geometry("Polygon has no outer ring"))?;
        let vertices = outer
            .iter()
            .map(|pos| match (pos[0].as_f64(), pos[1].as_f64()) {
                // GeoJSON positions are [lon, lat].
                (Some(lon), Some(lat)) => Ok((lat, lon)),
                _ => Err(geometry("positions must be [lon, lat] numbers")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(vertices, zone)
    }

    pub fn zone_name(&self) -> &str {
        &self.zone_name
    }

    /// Closed ring; the last vertex equals the first.
    pub fn ring(&self) -> &[(f64, f64)] {
        &self.ring
    }

    /// (min_lat, min_lon, max_lat, max_lon)
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.ring.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(lat, lon)| (a.min(lat), b.min(lon), c.max(lat), d.max(lon)),
        )
    }

    /// Ray-casting point-in-polygon test.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let mut inside = false;
        for w in self.ring.windows(2) {
            let ((lat_a, lon_a), (lat_b, lon_b)) = (w[0], w[1]);
            if (lat_a > lat) != (lat_b > lat) {
                let lon_cross = lon_a + (lat - lat_a) * (lon_b - lon_a) / (lat_b - lat_a);
                if lon < lon_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}
