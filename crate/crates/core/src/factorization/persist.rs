//! Binary model files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes   "TPMFMODL"
//! version    u32       1
//! k          u32
//! n_users    u64
//! n_topics   u64
//! block P:   rows u32, cols u64, rows*cols f64 (column-major)
//! block Q:   rows u32, cols u64, rows*cols f64 (column-major)
//! users      n_users  × (len u32, UTF-8 bytes)
//! topics     n_topics × (len u32, UTF-8 bytes)
//! crc32      u32 over every preceding byte
//! ```
//!
//! Each matrix block repeats its own shape; a block whose shape disagrees
//! with the header is rejected.

use std::fs;
use std::io;
use std::path::Path;

use super::FactorModel;
use crate::matrix::IndexMap;

pub const MAGIC: &[u8; 8] = b"TPMFMODL";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error(
        "truncated model file: needed {needed} bytes at offset {offset}, {available} available"
    )]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("{block} block has k = {block_k} but header says k = {header_k}")]
    KMismatch {
        block: &'static str,
        header_k: u32,
        block_k: u32,
    },
    #[error("{what}: expected {expected} entries, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} trailing bytes after model data")]
    TrailingBytes(usize),
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub fn encode(model: &FactorModel) -> Vec<u8> {
    let k = model.k();
    let mut buf = Vec::with_capacity(48 + 8 * (model.p().len() + model.q().len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(k as u32).to_le_bytes());
    buf.extend_from_slice(&(model.users().len() as u64).to_le_bytes());
    buf.extend_from_slice(&(model.topics().len() as u64).to_le_bytes());
    for (data, cols) in [
        (model.p(), model.users().len()),
        (model.q(), model.topics().len()),
    ] {
        buf.extend_from_slice(&(k as u32).to_le_bytes());
        buf.extend_from_slice(&(cols as u64).to_le_bytes());
        for x in data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    for map in [model.users(), model.topics()] {
        for id in map.ids() {
            buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn count(&mut self) -> Result<usize, FormatError> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| FormatError::Invalid(format!("count {n} too large")))
    }

    fn block(&mut self, name: &'static str, k: u32, cols: usize) -> Result<Vec<f64>, FormatError> {
        let block_k = self.u32()?;
        if block_k != k {
            return Err(FormatError::KMismatch {
                block: name,
                header_k: k,
                block_k,
            });
        }
        let block_cols = self.count()?;
        if block_cols != cols {
            return Err(FormatError::ShapeMismatch {
                what: name,
                expected: cols,
                found: block_cols,
            });
        }
        let n = (k as usize)
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| FormatError::Invalid(format!("{name} block too large")))?;
        Ok(self
            .take(n)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect())
    }

    fn ids(&mut self, n: usize) -> Result<IndexMap, FormatError> {
        let mut ids = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = self.u32()? as usize;
            let bytes = self.take(len)?;
            let id = std::str::from_utf8(bytes)
                .map_err(|e| FormatError::Invalid(format!("id is not UTF-8: {e}")))?;
            ids.push(id.to_string());
        }
        IndexMap::from_ids(ids).map_err(|e| FormatError::Invalid(e.to_string()))
    }
}

pub fn decode(buf: &[u8]) -> Result<FactorModel, FormatError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len()).map_err(|_| FormatError::BadMagic)? != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    if buf.len() < r.pos + 4 {
        return Err(FormatError::Truncated {
            offset: r.pos,
            needed: 4,
            available: buf.len() - r.pos,
        });
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }
    let mut r = Reader {
        buf: body,
        pos: r.pos,
    };
    let k = r.u32()?;
    let n_users = r.count()?;
    let n_topics = r.count()?;
    let p = r.block("P", k, n_users)?;
    let q = r.block("Q", k, n_topics)?;
    let users = r.ids(n_users)?;
    let topics = r.ids(n_topics)?;
    if r.pos != body.len() {
        return Err(FormatError::TrailingBytes(body.len() - r.pos));
    }
    FactorModel::from_parts(k as usize, users, topics, p, q)
}

pub fn save(model: &FactorModel, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<FactorModel, FormatError> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&buf)
}
