use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::binary::{self, Matrix};
use super::{Corpus, FeatureVector, StoreError, Vote};
use crate::FEATURE_DIM;

/// File locations of a persisted corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataPaths {
    pub images: PathBuf,
    pub votes: PathBuf,
    pub features: PathBuf,
    pub features_idx: PathBuf,
}

impl DataPaths {
    /// The conventional layout inside one data directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            images: dir.join("images.jsonl"),
            votes: dir.join("votes.jsonl"),
            features: dir.join("features.bin"),
            features_idx: dir.join("features.idx.jsonl"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct IndexRow {
    row: usize,
    image_id: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), StoreError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize to JSON");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_votes(path: &Path) -> Result<Vec<Vote>, StoreError> {
    read_jsonl(path)
}

pub fn write_votes(path: &Path, votes: &[Vote]) -> Result<(), StoreError> {
    write_jsonl(path, votes)
}

/// Appends one vote to a JSONL log and syncs it to disk before returning.
pub fn append_vote(path: &Path, vote: &Vote) -> Result<(), StoreError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    let mut line = serde_json::to_string(vote).expect("votes serialize to JSON");
    line.push('\n');
    f.write_all(line.as_bytes()).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

/// Reads a `PMF1` matrix of `dim` columns and its row → image id sidecar.
///
/// The sidecar must name every row exactly once.
pub(crate) fn read_indexed_matrix(
    bin: &Path,
    idx: &Path,
    dim: usize,
) -> Result<Vec<(String, Vec<f32>)>, StoreError> {
    let file = File::open(bin).map_err(io_err(bin))?;
    let matrix = binary::read_matrix(BufReader::new(file), dim)
        .map_err(|source| StoreError::Binary { path: bin.to_owned(), source })?;
    let index: Vec<IndexRow> = read_jsonl(idx)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(index.len());
    for (line, entry) in index.into_iter().enumerate() {
        let parse = |message: String| StoreError::Parse { path: idx.to_owned(), line: line + 1, message };
        if entry.row >= matrix.rows() {
            return Err(parse(format!("row {} out of range ({} rows)", entry.row, matrix.rows())));
        }
        if !seen.insert(entry.row) {
            return Err(parse(format!("row {} listed twice", entry.row)));
        }
        out.push((entry.image_id, matrix.row(entry.row).to_vec()));
    }
    if seen.len() != matrix.rows() {
        return Err(StoreError::Parse {
            path: idx.to_owned(),
            line: seen.len(),
            message: format!("index names {} of {} rows", seen.len(), matrix.rows()),
        });
    }
    Ok(out)
}

pub(crate) fn write_indexed_matrix<'a>(
    bin: &Path,
    idx: &Path,
    dim: usize,
    rows: impl IntoIterator<Item = (&'a str, &'a [f32])>,
) -> Result<(), StoreError> {
    let mut matrix = Matrix::new(dim);
    let mut index = Vec::new();
    for (row, (id, values)) in rows.into_iter().enumerate() {
        matrix.push_row(values);
        index.push(IndexRow { row, image_id: id.to_owned() });
    }
    if let Some(parent) = bin.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let w = BufWriter::new(File::create(bin).map_err(io_err(bin))?);
    binary::write_matrix(w, &matrix).map_err(io_err(bin))?;
    write_jsonl(idx, &index)
}

impl Corpus {
    /// Loads a corpus. The vote log and feature files are optional; the
    /// image file is not. Counters are rebuilt from the vote log; the
    /// values stored with the images are ignored.
    pub fn load(paths: &DataPaths) -> Result<Self, StoreError> {
        let mut corpus = Corpus::new();
        for img in read_jsonl(&paths.images)? {
            corpus.put_image(img)?;
        }
        if paths.votes.exists() {
            corpus.votes = read_votes(&paths.votes)?;
        }
        if paths.features.exists() {
            for (id, values) in read_indexed_matrix(&paths.features, &paths.features_idx, FEATURE_DIM)? {
                if !corpus.images.contains_key(&id) {
                    return Err(StoreError::Integrity(format!("feature row for unknown image {id:?}")));
                }
                if corpus.features.contains_key(&id) {
                    return Err(StoreError::Conflict(id));
                }
                let fv = FeatureVector::new(id.clone(), values)?;
                corpus.features.insert(id, fv);
            }
        }
        corpus.check_integrity()?;
        corpus.rebuild_counters();
        Ok(corpus)
    }

    pub fn save(&self, paths: &DataPaths) -> Result<(), StoreError> {
        write_jsonl(&paths.images, self.images.values())?;
        write_votes(&paths.votes, &self.votes)?;
        write_indexed_matrix(
            &paths.features,
            &paths.features_idx,
            FEATURE_DIM,
            self.features.values().map(|f| (f.image_id(), f.values())),
        )
    }
}
