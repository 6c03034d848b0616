//! Binary parameter container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic         8 bytes   "ABMCKPT\0"
//! version       u32       1
//! manifest_len  u32
//! manifest      manifest_len bytes of UTF-8 (JSON, owned by the caller)
//! layer_count   u32
//! layer_count × {
//!   name_len    u16
//!   name        name_len bytes of UTF-8
//!   kind        u8        0 = conv2d, 1 = dense
//!   dims        conv2d: in_ch u32, out_ch u32, kernel u32
//!               dense:  inputs u32, outputs u32
//!   step        u64       Adam step counter
//!   weight      f64 × |weight|
//!   bias        f64 × |bias|
//!   m_weight    f64 × |weight|
//!   v_weight    f64 × |weight|
//!   m_bias      f64 × |bias|
//!   v_bias      f64 × |bias|
//! }
//! digest        32 bytes  SHA-256 of every preceding byte
//! ```

use sha2::{Digest, Sha256};

use super::{AdamMoments, LayerKind, LayerParams, Tensor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ABMCKPT\0";
pub const VERSION: u32 = 1;

pub fn encode(manifest: &str, layers: &[&LayerParams]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        out.extend_from_slice(&(l.name.len() as u16).to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        match l.kind {
            LayerKind::Conv2d { in_ch, out_ch, kernel } => {
                out.push(0);
                for d in [in_ch, out_ch, kernel] {
                    out.extend_from_slice(&(d as u32).to_le_bytes());
                }
            }
            LayerKind::Dense { inputs, outputs } => {
                out.push(1);
                for d in [inputs, outputs] {
                    out.extend_from_slice(&(d as u32).to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&l.adam.step.to_le_bytes());
        for t in [&l.weight, &l.bias, &l.adam.m_weight, &l.adam.v_weight, &l.adam.m_bias, &l.adam.v_bias] {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CheckpointFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::CheckpointFormat("tensor too large".into()))?)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Tensor::new(shape, data)
    }
}

pub fn decode(bytes: &[u8]) -> Result<(String, Vec<LayerParams>)> {
    if bytes.len() < MAGIC.len() + 32 || &bytes[..8] != MAGIC {
        return Err(Error::CheckpointFormat("bad magic".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::CheckpointFormat("digest mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CheckpointFormat(format!("unsupported version {version}")));
    }
    let mlen = r.u32()? as usize;
    let manifest = String::from_utf8(r.take(mlen)?.to_vec()).map_err(|_| Error::CheckpointFormat("manifest is not UTF-8".into()))?;
    let count = r.u32()?;
    let mut layers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let nlen = r.u16()? as usize;
        let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|_| Error::CheckpointFormat("layer name is not UTF-8".into()))?;
        let kind = match r.u8()? {
            0 => LayerKind::Conv2d { in_ch: r.u32()? as usize, out_ch: r.u32()? as usize, kernel: r.u32()? as usize },
            1 => LayerKind::Dense { inputs: r.u32()? as usize, outputs: r.u32()? as usize },
            k => return Err(Error::CheckpointFormat(format!("layer {name}: unknown kind {k}"))),
        };
        let step = r.u64()?;
        let ws = kind.weight_shape();
        let bs = [kind.bias_len()];
        let weight = r.tensor(&ws)?;
        let bias = r.tensor(&bs)?;
        let adam = AdamMoments { m_weight: r.tensor(&ws)?, v_weight: r.tensor(&ws)?, m_bias: r.tensor(&bs)?, v_bias: r.tensor(&bs)?, step };
        layers.push(LayerParams { name, kind, weight, bias, adam });
    }
    if r.pos != body.len() {
        return Err(Error::CheckpointFormat(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok((manifest, layers))
}
