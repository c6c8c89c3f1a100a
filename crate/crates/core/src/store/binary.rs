//! Row-major little-endian `f32` matrices behind a `PMF1` header.
//!
//! Layout: 4 magic bytes, `u32` row count, `u32` dimension, then
//! `rows * dim` IEEE-754 single precision values. The same layout backs the
//! per-image feature file (dim 512) and the pair dataset file (dim 1024).

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"PMF1";
const HEADER_LEN: u64 = 12;

#[derive(Debug, Error)]
pub enum BinaryError {
    #[error("bad magic bytes {0:?}, expected \"PMF1\"")]
    BadMagic([u8; 4]),
    #[error("dimension {found} does not match expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("truncated matrix: expected {expected} bytes of data at offset {offset}")]
    Truncated { offset: u64, expected: u64 },
    #[error("trailing bytes after {offset} bytes of matrix data")]
    TrailingBytes { offset: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A dense matrix read from or destined for a `PMF1` file.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self { dim, data: Vec::with_capacity(dim * rows) }
    }

    pub fn push_row(&mut self, row: &[f32]) {
        assert_eq!(row.len(), self.dim, "row length must equal matrix dimension");
        self.data.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows())
    }
}

pub fn write_matrix<W: Write>(mut w: W, m: &Matrix) -> io::Result<()> {
    let rows = u32::try_from(m.rows()).map_err(|_| io::Error::other("too many rows"))?;
    let dim = u32::try_from(m.dim).map_err(|_| io::Error::other("dimension too large"))?;
    w.write_all(&MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.data.len() * 4);
    for v in &m.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

/// Reads a matrix, rejecting any dimension other than `expected_dim`.
pub fn read_matrix<R: Read>(mut r: R, expected_dim: usize) -> Result<Matrix, BinaryError> {
    let mut header = [0u8; HEADER_LEN as usize];
    r.read_exact(&mut header).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => BinaryError::Truncated { offset: 0, expected: HEADER_LEN },
        _ => BinaryError::Io(e),
    })?;
    let magic: [u8; 4] = header[0..4].try_into().expect("slice of length 4");
    if magic != MAGIC {
        return Err(BinaryError::BadMagic(magic));
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let dim = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    if dim != expected_dim {
        return Err(BinaryError::Dimension { expected: expected_dim, found: dim });
    }

    let expected = (rows as u64) * (dim as u64) * 4;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if (bytes.len() as u64) < expected {
        return Err(BinaryError::Truncated { offset: HEADER_LEN + bytes.len() as u64, expected });
    }
    if (bytes.len() as u64) > expected {
        return Err(BinaryError::TrailingBytes { offset: HEADER_LEN + expected });
    }

    let mut data = Vec::with_capacity(rows * dim);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(BinaryError::NonFinite { row: i / dim, col: i % dim });
        }
        data.push(v);
    }
    Ok(Matrix { dim, data })
}
