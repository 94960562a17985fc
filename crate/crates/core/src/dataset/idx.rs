//! IDX files (MNIST). Big-endian header: two zero bytes, an element-type
//! byte (only `0x08`, unsigned byte, is supported), the number of dimensions,
//! then one `u32` per dimension, then the payload.

use std::path::Path;

use super::DataMatrix;
use crate::{Error, Matrix, Result};

const UBYTE: u8 = 0x08;

struct IdxHeader {
    dims: Vec<usize>,
    payload_offset: usize,
    count: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<IdxHeader> {
    let err = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < 4 {
        return Err(err(bytes.len(), "file shorter than the 4-byte IDX magic".into()));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(err(0, format!("bad magic {:02x}{:02x}{:02x}{:02x}", bytes[0], bytes[1], bytes[2], bytes[3])));
    }
    if bytes[2] != UBYTE {
        return Err(err(2, format!("unsupported element type 0x{:02x} (only unsigned byte)", bytes[2])));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(err(3, "zero dimensions".into()));
    }
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err(err(bytes.len(), format!("truncated header: {ndims} dimensions need {header_len} bytes")));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        })
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| err(4, format!("dimension product overflows: {dims:?}")))?;
    let available = bytes.len() - header_len;
    if available < count {
        return Err(err(bytes.len(), format!("truncated payload: header {dims:?} needs {count} bytes, found {available}")));
    }
    if available > count {
        return Err(err(header_len + count, format!("{} trailing bytes after payload", available - count)));
    }
    Ok(IdxHeader {
        dims,
        payload_offset: header_len,
        count,
    })
}

/// Loads an IDX image file (`0x00000803`) as an `n x (width*height)` matrix
/// with pixel values scaled to `[0, 1]`.
pub fn load_idx(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let h = parse_header(path, &bytes)?;
    let n = h.dims[0];
    let d: usize = h.dims[1..].iter().product();
    if d == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 4,
            message: format!("items have zero size: {:?}", h.dims),
        });
    }
    let values: Vec<f64> = bytes[h.payload_offset..h.payload_offset + h.count]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    DataMatrix::from_matrix(Matrix::from_vec(n, d, values)?, path.display().to_string())
}

/// Loads an IDX label file (`0x00000801`).
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let h = parse_header(path, &bytes)?;
    if h.dims.len() != 1 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 3,
            message: format!("label file must be one-dimensional, header has {:?}", h.dims),
        });
    }
    Ok(bytes[h.payload_offset..].iter().map(|&b| b as i64).collect())
}

pub fn load_idx_with_labels(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<DataMatrix> {
    let data = load_idx(images)?;
    let labels = load_idx_labels(labels)?;
    data.with_labels(labels)
}
