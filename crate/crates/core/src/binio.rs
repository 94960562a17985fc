//! Little-endian framing shared by the native data, model and code files.
//!
//! Every container is `magic (8 bytes) | version u32 | body | crc32 u32`, the
//! checksum covering everything before it.

use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn u64s(&mut self, vs: &[u64]) {
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.u64(v);
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    path: PathBuf,
    buf: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and checksum; the reader is positioned after the
    /// version field.
    pub fn open(path: &Path, buf: &'a [u8], magic: &[u8; 8], version: u32) -> Result<Self> {
        let fmt = |offset: u64, message: &str| Error::Format {
            path: path.to_path_buf(),
            offset,
            message: message.to_string(),
        };
        if buf.len() < 16 {
            return Err(fmt(buf.len() as u64, "file too short for header"));
        }
        if &buf[..8] != magic {
            return Err(fmt(0, "bad magic"));
        }
        let found = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if found != version {
            return Err(Error::UnsupportedVersion {
                found,
                supported: version,
            });
        }
        let end = buf.len() - 4;
        let stored = u32::from_le_bytes(buf[end..].try_into().unwrap());
        let computed = crc32fast::hash(&buf[..end]);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        Ok(Reader {
            path: path.to_path_buf(),
            buf,
            pos: 12,
            end,
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.end - self.pos {
            return Err(Error::Format {
                path: self.path.clone(),
                offset: self.pos as u64,
                message: format!("truncated payload: need {n} bytes, {} left", self.end - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let at = self.offset();
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.error_at(at, "length does not fit in memory"))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.error("length overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u64s(&mut self, n: usize) -> Result<Vec<u64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.error("length overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.offset();
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.error_at(at, "invalid utf-8"))
    }

    pub fn error(&self, message: &str) -> Error {
        self.error_at(self.pos as u64, message)
    }

    pub fn error_at(&self, offset: u64, message: &str) -> Error {
        Error::Format {
            path: self.path.clone(),
            offset,
            message: message.to_string(),
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.end {
            return Err(self.error("trailing bytes after payload"));
        }
        Ok(())
    }
}
