use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScoredImage, ScoringError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureCollection {
    #[serde(rename = "type")]
    pub kind: String,
    pub features: Vec<Feature>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(rename = "type")]
    pub kind: String,
    pub geometry: Point,
    pub properties: MapProperties,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    #[serde(rename = "type")]
    pub kind: String,
    /// `[lon, lat]`
    pub coordinates: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapProperties {
    pub image_id: String,
    pub positive_pct: f64,
    pub negative_pct: f64,
    pub color: String,
}

/// GeoJSON point layer of scored images, ordered by image id.
pub fn emit_map(zone: &str, scored: &[ScoredImage]) -> Result<FeatureCollection, ScoringError> {
    if scored.is_empty() {
        return Err(ScoringError::NoScores(zone.to_owned()));
    }
    let mut rows: Vec<&ScoredImage> = scored.iter().collect();
    rows.sort_by(|a, b| a.score.image_id.cmp(&b.score.image_id));
    let features = rows
        .into_iter()
        .map(|s| Feature {
            kind: "Feature".into(),
            geometry: Point { kind: "Point".into(), coordinates: [s.lon, s.lat] },
            properties: MapProperties {
                image_id: s.score.image_id.clone(),
                positive_pct: s.score.positive_pct,
                negative_pct: s.score.negative_pct,
                color: s.score.color.clone(),
            },
        })
        .collect();
    Ok(FeatureCollection { kind: "FeatureCollection".into(), features })
}

pub fn write_map(path: &Path, map: &FeatureCollection) -> Result<(), ScoringError> {
    let text = serde_json::to_string_pretty(map).expect("maps serialize to JSON");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes `image_id,lat,lon,positive_pct,negative_pct,color` rows.
pub fn write_scores_csv(path: &Path, scored: &[ScoredImage]) -> Result<(), ScoringError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["image_id", "lat", "lon", "positive_pct", "negative_pct", "color"])?;
    for s in scored {
        w.write_record([
            s.score.image_id.clone(),
            s.lat.to_string(),
            s.lon.to_string(),
            s.score.positive_pct.to_string(),
            s.score.negative_pct.to_string(),
            s.score.color.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
