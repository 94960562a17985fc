//! `.fvecs` / `.bvecs` (TEXMEX ANN corpora): each record is a little-endian
//! `i32` dimension followed by that many `f32` or `u8` components.

use std::path::Path;

use super::DataMatrix;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecsKind {
    Fvecs,
    Bvecs,
}

impl VecsKind {
    fn component_size(self) -> usize {
        match self {
            VecsKind::Fvecs => 4,
            VecsKind::Bvecs => 1,
        }
    }
}

pub fn load_vecs(path: impl AsRef<Path>, kind: VecsKind) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let err = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < 4 {
        return Err(err(bytes.len(), "file shorter than one record header".into()));
    }
    let dim = i32::from_le_bytes(bytes[..4].try_into().unwrap());
    if dim <= 0 {
        return Err(err(0, format!("non-positive dimension {dim}")));
    }
    let d = dim as usize;
    let record = 4 + d * kind.component_size();
    if bytes.len() % record != 0 {
        return Err(err(
            bytes.len() - bytes.len() % record,
            format!("file size {} is not a multiple of the record size {record}", bytes.len()),
        ));
    }
    let n = bytes.len() / record;
    let mut values = Vec::with_capacity(n * d);
    for (i, rec) in bytes.chunks_exact(record).enumerate() {
        let this = i32::from_le_bytes(rec[..4].try_into().unwrap());
        if this != dim {
            return Err(err(i * record, format!("record {i} has dimension {this}, expected {dim}")));
        }
        let body = &rec[4..];
        match kind {
            VecsKind::Fvecs => {
                for (j, c) in body.chunks_exact(4).enumerate() {
                    let v = f32::from_le_bytes(c.try_into().unwrap());
                    if !v.is_finite() {
                        return Err(err(i * record + 4 + 4 * j, format!("non-finite value in record {i}")));
                    }
                    values.push(v as f64);
                }
            }
            VecsKind::Bvecs => values.extend(body.iter().map(|&b| b as f64)),
        }
    }
    DataMatrix::from_matrix(Matrix::from_vec(n, d, values)?, path.display().to_string())
}
