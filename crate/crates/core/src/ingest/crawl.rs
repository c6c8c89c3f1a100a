use super::{Geofence, IngestError};
use crate::geo::{meters_per_degree_lat, meters_per_degree_lon};

/// Compass headings requested at every grid location when none are given.
pub const DEFAULT_HEADINGS: [f64; 4] = [0.0, 90.0, 180.0, 270.0];

#[derive(Clone, Debug, PartialEq)]
pub struct CrawlPlan {
    pub grid_step_m: f64,
    pub headings: Vec<f64>,
    pub max_images: usize,
}

impl Default for CrawlPlan {
    fn default() -> Self {
        Self { grid_step_m: 50.0, headings: DEFAULT_HEADINGS.to_vec(), max_images: usize::MAX }
    }
}

impl CrawlPlan {
    fn validate(&self) -> Result<(), IngestError> {
        if !(self.grid_step_m.is_finite() && self.grid_step_m > 0.0) {
            return Err(IngestError::InvalidPlan(format!("grid step {} must be positive", self.grid_step_m)));
        }
        if self.headings.is_empty() {
            return Err(IngestError::InvalidPlan("at least one heading is required".into()));
        }
        if let Some(h) = self.headings.iter().find(|h| !(0.0..360.0).contains(*h)) {
            return Err(IngestError::InvalidPlan(format!("heading {h} outside [0, 360)")));
        }
        Ok(())
    }
}

/// One provider request: a location and a camera heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub lat: f64,
    pub lon: f64,
    pub heading: f64,
}

impl SamplePoint {
    pub(crate) fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        self.lat
            .total_cmp(&other.lat)
            .then(self.lon.total_cmp(&other.lon))
            .then(self.heading.total_cmp(&other.heading))
    }
}

/// Lays a regular grid over the fence and keeps the cells whose centers fall
/// inside it.
///
/// The grid is anchored at the south-west corner of the bounding box with
/// sample points at cell centers, so it depends only on the vertex set and
/// not on where the ring starts. Longitude spacing uses the meridian scale at
/// the bounding box's central latitude. Output is sorted by (lat, lon,
/// heading). When the plan caps the image count, points are thinned with an
/// even stride so the cap does not bias the sample toward one edge.
pub fn plan_crawl(fence: &Geofence, plan: &CrawlPlan) -> Result<Vec<SamplePoint>, IngestError> {
    plan.validate()?;
    let (min_lat, min_lon, max_lat, max_lon) = fence.bbox();
    let center_lat = (min_lat + max_lat) / 2.0;
    let dlat = plan.grid_step_m / meters_per_degree_lat();
    let dlon = plan.grid_step_m / meters_per_degree_lon(center_lat);

    let mut headings = plan.headings.clone();
    headings.sort_by(f64::total_cmp);
    headings.dedup();

    let mut points = Vec::new();
    for i in 0.. {
        let lat = min_lat + (i as f64 + 0.5) * dlat;
        if lat > max_lat {
            break;
        }
        for j in 0.. {
            let lon = min_lon + (j as f64 + 0.5) * dlon;
            if lon > max_lon {
                break;
            }
            if fence.contains(lat, lon) {
                points.extend(headings.iter().map(|&heading| SamplePoint { lat, lon, heading }));
            }
        }
    }

    if points.len() > plan.max_images {
        let total = points.len();
        points = (0..plan.max_images).map(|k| points[k * total / plan.max_images]).collect();
    }
    Ok(points)
}
