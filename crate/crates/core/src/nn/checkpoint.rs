//! Binary parameter dumps.
//!
//! Layout (little-endian): magic `UMNN`, `u32` format version, `u8` head
//! tag, `u32` layer-size count, that many `u32` sizes, `u64` value count,
//! then the raw `f64` values. Floats are stored bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use super::mlp::{HeadKind, MlpParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"UMNN";
pub const VERSION: u32 = 1;

pub fn encode(p: &MlpParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 4 * p.sizes.len() + 8 * p.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(p.head.tag());
    out.extend_from_slice(&(p.sizes.len() as u32).to_le_bytes());
    for &s in &p.sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(p.data.len() as u64).to_le_bytes());
    for v in &p.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<MlpParams> {
    let mut c = Cursor { buf: bytes };
    if c.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let tag = c.take(1)?[0];
    let head = HeadKind::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown head tag {tag}")))?;
    let n = c.u32()? as usize;
    let sizes = (0..n).map(|_| c.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let mut p = MlpParams::zeros(sizes, head)?;
    let len = c.u64()? as usize;
    if len != p.data.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} values for these shapes, file has {len}",
            p.data.len()
        )));
    }
    for v in p.data.iter_mut() {
        *v = f64::from_le_bytes(c.take(8)?.try_into().unwrap());
    }
    if !c.buf.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(p)
}

pub fn save(p: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(p)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode(&buf)
}
