use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::warn;

use super::IngestError;
use crate::store::binary::BinaryError;
use crate::store::{io_read_indexed_matrix, Corpus, FeatureVector, StoreError};
use crate::FEATURE_DIM;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub ingested: usize,
    /// Corpus images still without a feature vector.
    pub missing: Vec<String>,
    /// Rows naming images that are not in the corpus (e.g. filtered out).
    pub ignored: Vec<String>,
}

/// Attaches externally computed feature vectors to corpus images.
///
/// The whole file is validated before the corpus is touched.
pub fn ingest_features(bin: &Path, idx: &Path, corpus: &mut Corpus) -> Result<IngestReport, IngestError> {
    let rows = io_read_indexed_matrix(bin, idx, FEATURE_DIM).map_err(|e| match e {
        StoreError::Binary { source: source @ BinaryError::Dimension { .. }, .. } => {
            IngestError::Format(source.to_string())
        }
        other => IngestError::Store(other),
    })?;

    let mut report = IngestReport::default();
    let mut seen = BTreeSet::new();
    let mut accepted = BTreeMap::new();
    for (id, values) in rows {
        if !seen.insert(id.clone()) {
            return Err(IngestError::Conflict(id));
        }
        if corpus.image(&id).is_none() {
            report.ignored.push(id);
            continue;
        }
        accepted.insert(id.clone(), FeatureVector::new(id, values)?);
    }
    for (id, fv) in &accepted {
        if corpus.feature(id).is_some_and(|existing| existing != fv) {
            return Err(IngestError::Conflict(id.clone()));
        }
    }
    report.ingested = accepted.len();
    for fv in accepted.into_values() {
        corpus.put_features(fv)?;
    }
    report.missing = corpus
        .images()
        .filter(|i| corpus.feature(&i.image_id).is_none())
        .map(|i| i.image_id.clone())
        .collect();
    if !report.missing.is_empty() {
        warn!("{} images have no feature vector", report.missing.len());
    }
    Ok(report)
}
