//! Native dataset container.
//!
//! ```text
//! magic   "IMHDATA\0"
//! version u32 = 1
//! n       u64
//! d       u64
//! labels  u8  (0 = absent, 1 = present)
//! provenance  u32 length + UTF-8 bytes
//! ids     n x u64
//! values  n*d x f64, row-major
//! labels  n x i64 (two's complement as u64), only when present
//! crc32   u32 over everything above
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use super::DataMatrix;
use crate::binio::{Reader, Writer};
use crate::{Matrix, Result};

const MAGIC: &[u8; 8] = b"IMHDATA\0";
const VERSION: u32 = 1;

pub fn write_native(data: &DataMatrix) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.u64(data.n() as u64);
    w.u64(data.dims() as u64);
    w.u8(data.labels().is_some() as u8);
    w.str(data.provenance());
    w.u64s(data.ids());
    w.f64s(data.values().as_slice());
    if let Some(l) = data.labels() {
        for &v in l {
            w.u64(v as u64);
        }
    }
    w.finish()
}

pub fn read_native(path: &Path, bytes: &[u8]) -> Result<DataMatrix> {
    let mut r = Reader::open(path, bytes, MAGIC, VERSION)?;
    let n = r.usize()?;
    let d = r.usize()?;
    let at = r.offset();
    let has_labels = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(r.error_at(at, "labels flag must be 0 or 1")),
    };
    let provenance = r.str()?;
    let ids = r.u64s(n)?;
    let cells = n.checked_mul(d).ok_or_else(|| r.error("n*d overflows"))?;
    let values = r.f64s(cells)?;
    let labels = if has_labels {
        Some(r.u64s(n)?.into_iter().map(|v| v as i64).collect())
    } else {
        None
    };
    r.finish()?;
    DataMatrix::new(Matrix::from_vec(n, d, values)?, ids, labels, provenance)
}

pub fn save_native(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_native(data))?;
    Ok(())
}

pub fn load_native(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    read_native(path, &bytes)
}
