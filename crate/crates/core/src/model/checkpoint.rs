//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "HBMLCKPT"
//! version  u32
//! config   u32 length + UTF-8 key=value lines
//! count    u32
//! per parameter:
//!   u16 name length + UTF-8 name
//!   u8  dtype (1 = f64)
//!   u8  ndim, then ndim × u32 dims
//!   prod(dims) × f64
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{HybridModel, ModelConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HBMLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

pub(crate) fn encode(model: &HybridModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let cfg = model.config.to_text();
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    out.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for id in model.store.ids() {
        let name = model.store.name(id);
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F64);
        let t = model.store.value(id);
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn save_checkpoint(model: &HybridModel, path: &Path) -> Result<()> {
    let bytes = encode(model);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(&bytes)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::CheckpointTruncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn utf8(&mut self, n: usize, what: &'static str) -> Result<&'a str> {
        std::str::from_utf8(self.take(n, what)?).map_err(|_| Error::CheckpointFormat(format!("{what} is not UTF-8")))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<HybridModel> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointMagic);
    }
    c.pos = 8;
    let version = c.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let cfg_len = c.u32("config length")? as usize;
    let config = ModelConfig::from_text(c.utf8(cfg_len, "config")?)?;
    // Seed is irrelevant: every value is overwritten below.
    let mut model = HybridModel::new(config, 0)?;
    let count = c.u32("parameter count")? as usize;
    if count != model.store.len() {
        return Err(Error::CheckpointFormat(format!(
            "{count} parameters stored, architecture has {}",
            model.store.len()
        )));
    }
    for _ in 0..count {
        let name_len = c.u16("parameter name length")? as usize;
        let name = c.utf8(name_len, "parameter name")?.to_string();
        let id = model
            .store
            .find(&name)
            .ok_or_else(|| Error::CheckpointFormat(format!("unknown parameter {name:?}")))?;
        let dtype = c.u8("dtype")?;
        if dtype != DTYPE_F64 {
            return Err(Error::CheckpointFormat(format!("unsupported dtype tag {dtype}")));
        }
        let ndim = c.u8("ndim")? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(c.u32("dims")? as usize);
        }
        let expected = model.store.value(id).shape().to_vec();
        if dims != expected {
            return Err(Error::CheckpointShape {
                name,
                found: dims,
                expected,
            });
        }
        let n: usize = dims.iter().product();
        let raw = c.take(n * 8, "parameter values")?;
        let dst = model.store.value_mut(id).data_mut();
        for (d, chunk) in dst.iter_mut().zip(raw.chunks_exact(8)) {
            *d = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::CheckpointFormat(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok(model)
}

pub fn load_checkpoint(path: &Path) -> Result<HybridModel> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
