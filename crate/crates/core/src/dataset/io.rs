use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetError, NormalizationStats, Partition, Partitions, TrainingExample};
use crate::store::binary::{read_matrix, write_matrix, Matrix};
use crate::store::{read_jsonl, write_jsonl, StoreError, VoteCode};
use crate::PAIR_DIM;

/// One line of `labels.jsonl`, describing the same row of `dataset.bin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub row: usize,
    pub label: VoteCode,
    pub origin_vote_id: String,
    pub swapped: bool,
    pub partition: Partition,
}

fn io_error(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Store(StoreError::Io { path: path.to_owned(), source })
}

/// Writes train, validation and test rows, in that order.
pub fn write_dataset(bin: &Path, labels: &Path, parts: &Partitions) -> Result<(), DatasetError> {
    let total = parts.train.len() + parts.val.len() + parts.test.len();
    let mut matrix = Matrix::with_capacity(PAIR_DIM, total);
    let mut rows = Vec::with_capacity(total);
    for p in [Partition::Train, Partition::Val, Partition::Test] {
        for ex in parts.get(p) {
            if ex.x.len() != PAIR_DIM {
                return Err(DatasetError::Format(format!("example of length {} (expected {PAIR_DIM})", ex.x.len())));
            }
            rows.push(LabelRow {
                row: rows.len(),
                label: ex.label,
                origin_vote_id: ex.origin_vote_id.clone(),
                swapped: ex.swapped,
                partition: p,
            });
            matrix.push_row(&ex.x);
        }
    }
    let f = File::create(bin).map_err(|e| io_error(bin, e))?;
    write_matrix(BufWriter::new(f), &matrix).map_err(|e| io_error(bin, e))?;
    write_jsonl(labels, &rows)?;
    Ok(())
}

pub fn read_dataset(bin: &Path, labels: &Path) -> Result<Partitions, DatasetError> {
    let f = File::open(bin).map_err(|e| io_error(bin, e))?;
    let matrix = read_matrix(BufReader::new(f), PAIR_DIM)
        .map_err(|source| DatasetError::Store(StoreError::Binary { path: bin.to_owned(), source }))?;
    let rows: Vec<LabelRow> = read_jsonl(labels)?;
    if rows.len() != matrix.rows() {
        return Err(DatasetError::Format(format!("{} label rows for {} matrix rows", rows.len(), matrix.rows())));
    }
    let mut parts = Partitions::default();
    for (i, r) in rows.into_iter().enumerate() {
        if r.row != i {
            return Err(DatasetError::Format(format!("label line {} names row {}", i + 1, r.row)));
        }
        if !r.label.is_charged() {
            return Err(DatasetError::Format(format!("row {i} has tie label")));
        }
        let ex = TrainingExample {
            x: matrix.row(i).to_vec(),
            label: r.label,
            origin_vote_id: r.origin_vote_id,
            swapped: r.swapped,
        };
        match r.partition {
            Partition::Train => parts.train.push(ex),
            Partition::Val => parts.val.push(ex),
            Partition::Test => parts.test.push(ex),
        }
    }
    Ok(parts)
}

pub fn write_stats(path: &Path, stats: &NormalizationStats) -> Result<(), DatasetError> {
    let f = File::create(path).map_err(|e| io_error(path, e))?;
    serde_json::to_writer(BufWriter::new(f), stats).map_err(|e| DatasetError::Format(e.to_string()))
}

pub fn read_stats(path: &Path) -> Result<NormalizationStats, DatasetError> {
    let f = File::open(path).map_err(|e| io_error(path, e))?;
    let stats: NormalizationStats =
        serde_json::from_reader(BufReader::new(f)).map_err(|e| DatasetError::Format(format!("{}: {e}", path.display())))?;
    if stats.mu.len() != stats.sigma.len() || !(stats.epsilon > 0.0) {
        return Err(DatasetError::Format(format!("{}: inconsistent statistics", path.display())));
    }
    Ok(stats)
}
