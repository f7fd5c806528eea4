//! Binary checkpoint format.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754 `f64`.
//!
//! ```text
//! magic        8 bytes  "EQODDSCK"
//! version      u32      format version (1)
//! spec_len     u32      byte length of the spec echo
//! spec         bytes    UTF-8 JSON of the NetworkSpec
//! meta_len     u32      byte length of the metadata
//! meta         bytes    UTF-8 free-form metadata (JSON object)
//! n_layers     u32
//! per layer:
//!   in_dim     u32
//!   out_dim    u32
//!   flags      u32      bit 0: layer norm block present, bit 1: spectral block present
//!   weight     in_dim*out_dim f64, row-major (row = input unit)
//!   bias       out_dim f64
//!   gamma,beta out_dim f64 each          (if bit 0)
//!   u          in_dim f64, v out_dim f64 (if bit 1)
//! ```

use std::path::Path;

use super::network::{LayerParams, NetworkParams, NetworkSpec, NormParams, SpectralState};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EQODDSCK";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(params: &NetworkParams, meta: &str) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    let spec = serde_json::to_string(&params.spec).expect("spec serializes");
    put_u32(&mut buf, spec.len() as u32);
    buf.extend_from_slice(spec.as_bytes());
    put_u32(&mut buf, meta.len() as u32);
    buf.extend_from_slice(meta.as_bytes());
    put_u32(&mut buf, params.layers.len() as u32);
    for l in &params.layers {
        put_u32(&mut buf, l.in_dim as u32);
        put_u32(&mut buf, l.out_dim as u32);
        let flags = u32::from(l.norm.is_some()) | (u32::from(l.spectral.is_some()) << 1);
        put_u32(&mut buf, flags);
        put_f64s(&mut buf, &l.weight);
        put_f64s(&mut buf, &l.bias);
        if let Some(n) = &l.norm {
            put_f64s(&mut buf, &n.gamma);
            put_f64s(&mut buf, &n.beta);
        }
        if let Some(s) = &l.spectral {
            put_f64s(&mut buf, &s.u);
            put_f64s(&mut buf, &s.v);
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::validation("checkpoint", format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::validation("checkpoint", "size overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::validation("checkpoint", "invalid UTF-8"))
    }
}

/// Decode a checkpoint, returning the parameters and the metadata string.
pub fn decode(bytes: &[u8]) -> Result<(NetworkParams, String)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::validation("checkpoint", "bad magic"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::validation("checkpoint", format!("unsupported format version {version}")));
    }
    let spec: NetworkSpec = serde_json::from_str(&r.string()?)
        .map_err(|e| Error::validation("checkpoint", format!("spec echo: {e}")))?;
    let meta = r.string()?;
    let n_layers = r.u32()? as usize;
    if n_layers != spec.n_layers() {
        return Err(Error::validation("checkpoint", "layer count disagrees with spec echo"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        let flags = r.u32()?;
        let weight = r.f64s(in_dim * out_dim)?;
        let bias = r.f64s(out_dim)?;
        let norm = if flags & 1 != 0 {
            Some(NormParams { gamma: r.f64s(out_dim)?, beta: r.f64s(out_dim)? })
        } else {
            None
        };
        let spectral = if flags & 2 != 0 {
            Some(SpectralState { u: r.f64s(in_dim)?, v: r.f64s(out_dim)? })
        } else {
            None
        };
        layers.push(LayerParams { in_dim, out_dim, weight, bias, norm, spectral });
    }
    if r.pos != bytes.len() {
        return Err(Error::validation("checkpoint", "trailing bytes"));
    }
    let params = NetworkParams::from_layers(spec, layers).map_err(|e| Error::validation("checkpoint", e.to_string()))?;
    Ok((params, meta))
}

pub fn save(path: &Path, params: &NetworkParams, meta: &str) -> Result<()> {
    std::fs::write(path, encode(params, meta)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(NetworkParams, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
