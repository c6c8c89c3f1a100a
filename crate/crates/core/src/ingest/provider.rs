use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use log::{debug, warn};
use thiserror::Error;

use super::{IngestError, SamplePoint};
use crate::store::StreetImage;

pub const ENV_PROVIDER_URL: &str = "PERCEPTMAP_PROVIDER_URL";
pub const ENV_PROVIDER_KEY: &str = "PERCEPTMAP_PROVIDER_KEY";
pub const DEFAULT_PROVIDER_URL: &str = "https://maps.googleapis.com/maps/api/streetview";

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Source of street-level image bytes for a location and heading.
pub trait ImageryProvider: Sync {
    fn fetch(&self, point: &SamplePoint) -> Result<Vec<u8>, ProviderError>;
}

/// Client for a Street View Static style endpoint
/// (`?size=..&location=lat,lon&heading=..&key=..`).
pub struct StreetViewClient {
    endpoint: String,
    key: String,
    size: String,
    agent: ureq::Agent,
}

impl StreetViewClient {
    pub fn new(endpoint: impl Into<String>, key: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(30))).build();
        Self {
            endpoint: endpoint.into(),
            key: key.into(),
            size: "640x640".into(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// Reads endpoint and key from `PERCEPTMAP_PROVIDER_URL` and
    /// `PERCEPTMAP_PROVIDER_KEY`.
    pub fn from_env() -> Result<Self, IngestError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, IngestError> {
        let key = lookup(ENV_PROVIDER_KEY)
            .filter(|k| !k.is_empty())
            .ok_or_else(|| IngestError::Config(format!("{ENV_PROVIDER_KEY} is not set")))?;
        let endpoint = lookup(ENV_PROVIDER_URL).unwrap_or_else(|| DEFAULT_PROVIDER_URL.to_owned());
        Ok(Self::new(endpoint, key))
    }
}

impl ImageryProvider for StreetViewClient {
    fn fetch(&self, p: &SamplePoint) -> Result<Vec<u8>, ProviderError> {
        let response = self
            .agent
            .get(&self.endpoint)
            .query("size", &self.size)
            .query("location", format!("{},{}", p.lat, p.lon))
            .query("heading", format!("{}", p.heading))
            .query("key", &self.key)
            .call();
        match response {
            Ok(mut r) => r.body_mut().read_to_vec().map_err(|e| ProviderError::Transport(e.to_string())),
            Err(ureq::Error::StatusCode(code)) => Err(ProviderError::Status(code)),
            Err(e) => Err(ProviderError::Transport(e.to_string())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FetchOptions {
    /// Directory receiving image files; doubles as the response cache.
    pub out_dir: PathBuf,
    pub zone: String,
    /// Maximum requests in flight.
    pub parallelism: usize,
}

impl FetchOptions {
    pub fn new(out_dir: impl Into<PathBuf>, zone: impl Into<String>) -> Self {
        Self { out_dir: out_dir.into(), zone: zone.into(), parallelism: 4 }
    }
}

#[derive(Debug, Default)]
pub struct FetchReport {
    pub images: Vec<StreetImage>,
    pub failures: Vec<(SamplePoint, String)>,
    pub cache_hits: usize,
}

fn cache_file_name(p: &SamplePoint) -> String {
    format!("{:.7}_{:.7}_{:.1}.jpg", p.lat, p.lon, p.heading)
}

/// Downloads one image per sample point into `opts.out_dir`.
///
/// Points are sorted by (lat, lon, heading) and image ids are
/// `<zone>-<ordinal>` in that order, so ids do not depend on request
/// completion order. A point whose file already exists is served from disk.
/// Failed requests are logged and skipped.
pub fn fetch_images(
    points: &[SamplePoint],
    provider: &dyn ImageryProvider,
    opts: &FetchOptions,
) -> Result<FetchReport, IngestError> {
    let mut sorted = points.to_vec();
    sorted.sort_by(SamplePoint::cmp_key);
    std::fs::create_dir_all(&opts.out_dir)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<bool, String>>>> = Mutex::new(vec![None; sorted.len()]);
    let workers = opts.parallelism.clamp(1, sorted.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(p) = sorted.get(i) else { break };
                let path = opts.out_dir.join(cache_file_name(p));
                let outcome = if path.exists() {
                    Ok(true)
                } else {
                    provider
                        .fetch(p)
                        .map_err(|e| e.to_string())
                        .and_then(|bytes| std::fs::write(&path, bytes).map_err(|e| e.to_string()))
                        .map(|()| false)
                };
                results.lock().expect("fetch results lock")[i] = Some(outcome);
            });
        }
    });

    let mut report = FetchReport::default();
    for (ordinal, (p, outcome)) in sorted.iter().zip(results.into_inner().expect("fetch results lock")).enumerate() {
        match outcome.expect("every point is attempted") {
            Ok(cached) => {
                if cached {
                    debug!("cache hit for ({}, {}, {})", p.lat, p.lon, p.heading);
                    report.cache_hits += 1;
                }
                let uri = opts.out_dir.join(cache_file_name(p));
                report.images.push(
                    StreetImage::new(format!("{}-{ordinal:06}", opts.zone), p.lat, p.lon, opts.zone.clone())
                        .with_uri(uri.to_string_lossy()),
                );
            }
            Err(message) => {
                warn!("skipping ({}, {}, heading {}): {message}", p.lat, p.lon, p.heading);
                report.failures.push((*p, message));
            }
        }
    }
    if report.images.is_empty() && !sorted.is_empty() {
        return Err(IngestError::AllFailed { attempted: sorted.len() });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::AtomicUsize;

    /// Canned responses keyed by heading; unknown headings get a 404.
    struct FakeProvider {
        statuses: HashMap<u64, u16>,
        calls: AtomicUsize,
    }

    impl FakeProvider {
        fn ok() -> Self {
            Self { statuses: HashMap::new(), calls: AtomicUsize::new(0) }
        }
    }

    impl ImageryProvider for FakeProvider {
        fn fetch(&self, p: &SamplePoint) -> Result<Vec<u8>, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.statuses.get(&(p.heading as u64)) {
                Some(code) => Err(ProviderError::Status(*code)),
                None => Ok(format!("jpeg {} {} {}", p.lat, p.lon, p.heading).into_bytes()),
            }
        }
    }

    fn points() -> Vec<SamplePoint> {
        vec![
            SamplePoint { lat: 4.651, lon: -74.06, heading: 90.0 },
            SamplePoint { lat: 4.650, lon: -74.06, heading: 0.0 },
            SamplePoint { lat: 4.652, lon: -74.05, heading: 180.0 },
        ]
    }

    #[test]
    fn happy_path() {
        let dir = tempfile::tempdir().unwrap();
        let report = fetch_images(&points(), &FakeProvider::ok(), &FetchOptions::new(dir.path(), "z")).unwrap();
        assert_eq!(report.images.len(), 3);
        assert!(report.failures.is_empty());
        let ids: Vec<_> = report.images.iter().map(|i| i.image_id.as_str()).collect();
        assert_eq!(ids, ["z-000000", "z-000001", "z-000002"]);
        // coordinates are the requested ones, sorted
        assert_eq!((report.images[0].lat, report.images[0].lon), (4.650, -74.06));
        for img in &report.images {
            assert!(std::path::Path::new(&img.uri).exists());
            assert!(img.descriptor_count.is_none());
        }
    }

    #[test]
    fn partial_failure_skips_point() {
        let dir = tempfile::tempdir().unwrap();
        let mut fake = FakeProvider::ok();
        fake.statuses.insert(90, 404);
        let report = fetch_images(&points(), &fake, &FetchOptions::new(dir.path(), "z")).unwrap();
        assert_eq!(report.images.len(), 2);
        assert_eq!(report.failures.len(), 1);
        assert!(report.failures[0].1.contains("404"));
    }

    #[test]
    fn all_failed() {
        let dir = tempfile::tempdir().unwrap();
        let mut fake = FakeProvider::ok();
        for h in [0, 90, 180] {
            fake.statuses.insert(h, 500);
        }
        let err = fetch_images(&points(), &fake, &FetchOptions::new(dir.path(), "z")).unwrap_err();
        assert!(matches!(err, IngestError::AllFailed { attempted: 3 }));
    }

    #[test]
    fn second_run_uses_cache() {
        let dir = tempfile::tempdir().unwrap();
        let fake = FakeProvider::ok();
        let opts = FetchOptions::new(dir.path(), "z");
        let first = fetch_images(&points(), &fake, &opts).unwrap();
        let second = fetch_images(&points(), &fake, &opts).unwrap();
        assert_eq!(fake.calls.load(Ordering::SeqCst), 3);
        assert_eq!(second.cache_hits, 3);
        assert_eq!(first.images, second.images);
    }

    #[test]
    fn missing_key_is_config_error() {
        let err = StreetViewClient::from_lookup(|_| None).err().unwrap();
        assert!(matches!(err, IngestError::Config(msg) if msg.contains(ENV_PROVIDER_KEY)));
        let client = StreetViewClient::from_lookup(|k| (k == ENV_PROVIDER_KEY).then(|| "k".to_owned())).unwrap();
        assert_eq!(client.endpoint, DEFAULT_PROVIDER_URL);
    }
}
