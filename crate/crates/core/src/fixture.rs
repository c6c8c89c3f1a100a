//! Generated corpora with a known answer.
//!
//! Images sit on a square lattice; the northern half belongs to the "safe"
//! cluster. Each image's features are drawn from one of two isotropic
//! Gaussians whose centers are `separation` standard deviations apart.
//! Human votes compare random image pairs: cross-cluster pairs favor the
//! safe image, same-cluster pairs are ties.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geo::{meters_per_degree_lat, meters_per_degree_lon};
use crate::store::{Corpus, DataPaths, FeatureVector, StoreError, StreetImage, Vote, VoteCode, VoteSource};
use crate::FEATURE_DIM;

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureSpec {
    pub zone: String,
    pub images: usize,
    pub votes: usize,
    /// Images in a second zone that receives features but no votes.
    pub unlabeled: Option<(String, usize)>,
    /// Distance between cluster centers, in standard deviations.
    pub separation: f64,
    pub spacing_m: f64,
    pub origin: (f64, f64),
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            zone: "fixture".into(),
            images: 2000,
            votes: 6000,
            unlabeled: None,
            separation: 4.0,
            spacing_m: 30.0,
            origin: (4.6486, -74.0628),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub corpus: Corpus,
    /// 1 for the safe cluster, 0 otherwise.
    pub clusters: BTreeMap<String, u8>,
}

fn lattice(zone: &str, n: usize, origin: (f64, f64), spacing_m: f64) -> Vec<(StreetImage, u8)> {
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n.div_ceil(side);
    let dlat = spacing_m / meters_per_degree_lat();
    let dlon = spacing_m / meters_per_degree_lon(origin.0);
    (0..n)
        .map(|i| {
            let (row, col) = (i / side, i % side);
            let img = StreetImage::new(
                format!("{zone}-{i:05}"),
                origin.0 + row as f64 * dlat,
                origin.1 + col as f64 * dlon,
                zone,
            )
            .with_uri(format!("images/{zone}-{i:05}.jpg"));
            (img, u8::from(2 * row >= rows))
        })
        .collect()
}

pub fn generate(spec: &FixtureSpec) -> Result<Fixture, StoreError> {
    if spec.images < 2 {
        return Err(StoreError::InvalidImage { id: spec.zone.clone(), reason: "a fixture needs at least two images".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut direction: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|d| *d /= norm);

    let mut corpus = Corpus::new();
    let mut clusters = BTreeMap::new();
    let mut placed = lattice(&spec.zone, spec.images, spec.origin, spec.spacing_m);
    if let Some((zone, n)) = &spec.unlabeled {
        // a second block east of the first
        let side = (spec.images as f64).sqrt().ceil();
        let shift = (side + 3.0) * spec.spacing_m / meters_per_degree_lon(spec.origin.0);
        placed.extend(lattice(zone, *n, (spec.origin.0, spec.origin.1 + shift), spec.spacing_m));
    }
    for (img, cluster) in placed {
        let sign = if cluster == 1 { 0.5 } else { -0.5 };
        let values = direction
            .iter()
            .map(|d| (sign * spec.separation * d + rng.sample::<f64, _>(StandardNormal)) as f32)
            .collect();
        let id = img.image_id.clone();
        let count = rng.gen_range(380..1200);
        corpus.put_image(img.with_descriptor_count(count))?;
        corpus.put_features(FeatureVector::new(id.clone(), values)?)?;
        clusters.insert(id, cluster);
    }

    let prefix = format!("{}-", spec.zone);
    let labeled: Vec<(String, u8)> =
        clusters.iter().filter(|(id, _)| id.starts_with(&prefix)).map(|(k, v)| (k.clone(), *v)).collect();
    let max_pairs = labeled.len() * (labeled.len() - 1) / 2;
    let mut seen = BTreeSet::new();
    let start: DateTime<Utc> = Utc.with_ymd_and_hms(2018, 3, 1, 8, 0, 0).unwrap();
    let mut k = 0;
    while k < spec.votes.min(max_pairs) {
        let (i, j) = (rng.gen_range(0..labeled.len()), rng.gen_range(0..labeled.len()));
        if i == j {
            continue;
        }
        let (l, r) = (&labeled[i], &labeled[j]);
        let key = if l.0 < r.0 { (l.0.clone(), r.0.clone()) } else { (r.0.clone(), l.0.clone()) };
        if !seen.insert(key) {
            continue;
        }
        let code = match l.1.cmp(&r.1) {
            std::cmp::Ordering::Greater => VoteCode::Left,
            std::cmp::Ordering::Less => VoteCode::Right,
            std::cmp::Ordering::Equal => VoteCode::Tie,
        };
        corpus.record_vote(Vote {
            vote_id: format!("fx-v{k:06}"),
            left_id: l.0.clone(),
            right_id: r.0.clone(),
            code,
            source: VoteSource::Human,
            session_id: format!("fx-s{k:06}"),
            timestamp: start + Duration::seconds(k as i64),
        })?;
        k += 1;
    }
    Ok(Fixture { corpus, clusters })
}

/// Generates a fixture and saves it in the standard layout under `dir`.
pub fn write_fixture(spec: &FixtureSpec, dir: &Path) -> Result<Fixture, StoreError> {
    let fx = generate(spec)?;
    fx.corpus.save(&DataPaths::in_dir(dir))?;
    Ok(fx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_m;

    fn small() -> FixtureSpec {
        FixtureSpec { images: 100, votes: 300, unlabeled: Some(("east".into(), 30)), seed: 4, ..FixtureSpec::default() }
    }

    #[test]
    fn shape_of_a_small_fixture() {
        let fx = generate(&small()).unwrap();
        assert_eq!(fx.corpus.images().count(), 130);
        assert_eq!(fx.corpus.features().len(), 130);
        assert_eq!(fx.corpus.votes().len(), 300);
        assert_eq!(fx.corpus.images_in_zone("east").count(), 30);
        assert_eq!(fx.clusters.values().filter(|c| **c == 1).count(), 50 + 12);
        fx.corpus.check_integrity().unwrap();
    }

    #[test]
    fn labels_follow_clusters() {
        let fx = generate(&small()).unwrap();
        for v in fx.corpus.votes() {
            let (l, r) = (fx.clusters[&v.left_id], fx.clusters[&v.right_id]);
            let expected = match (l, r) {
                (1, 0) => VoteCode::Left,
                (0, 1) => VoteCode::Right,
                _ => VoteCode::Tie,
            };
            assert_eq!(v.code, expected);
            assert!(v.left_id.starts_with("fixture-") && v.right_id.starts_with("fixture-"));
        }
    }

    #[test]
    fn images_are_spaced_and_pairs_unique() {
        let fx = generate(&small()).unwrap();
        let imgs: Vec<_> = fx.corpus.images().collect();
        for (i, a) in imgs.iter().enumerate() {
            for b in &imgs[i + 1..] {
                assert!(haversine_m(a.lat, a.lon, b.lat, b.lon) > 29.0);
            }
        }
        let keys: BTreeSet<_> = fx.corpus.votes().iter().map(|v| crate::survey::pair_key(&v.left_id, &v.right_id)).collect();
        assert_eq!(keys.len(), fx.corpus.votes().len());
    }

    #[test]
    fn clusters_are_separated_along_a_direction() {
        let fx = generate(&FixtureSpec { images: 400, votes: 0, ..FixtureSpec::default() }).unwrap();
        let mean = |c: u8| -> Vec<f64> {
            let rows: Vec<_> = fx.corpus.features().values().filter(|f| fx.clusters[f.image_id()] == c).collect();
            (0..FEATURE_DIM).map(|j| rows.iter().map(|f| f64::from(f.values()[j])).sum::<f64>() / rows.len() as f64).collect()
        };
        let (m0, m1) = (mean(0), mean(1));
        let dist = m0.iter().zip(&m1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        // the sample-mean noise adds about sqrt(512 * 2 / 200) ≈ 2.3 in quadrature
        assert!((dist - (16.0f64 + 5.12).sqrt()).abs() < 0.5, "distance {dist}");
    }

    #[test]
    fn deterministic_and_saved() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_fixture(&small(), dir.path()).unwrap();
        let loaded = Corpus::load(&DataPaths::in_dir(dir.path())).unwrap();
        assert_eq!(loaded, a.corpus);
        assert_eq!(generate(&small()).unwrap().corpus, a.corpus);
    }
}
