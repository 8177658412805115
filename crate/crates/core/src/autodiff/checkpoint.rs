use std::path::Path;

use super::{ParamSet, Tensor};
use crate::codec::ByteCursor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CMXW";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Little-endian `CMXW` encoding of named float32 tensors.
pub fn encode_checkpoint(params: &ParamSet<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.num_scalars() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], origin: &Path) -> Result<ParamSet<f32>> {
    let bad = |why: &str| Error::format(origin, why);
    let mut cur = ByteCursor::new(bytes);
    if cur.take(4) != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(bad("missing CMXW magic"));
    }
    let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let count = cur.u32().ok_or_else(|| bad("truncated header"))?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = cur.u32().ok_or_else(|| bad("truncated tensor name"))? as usize;
        let name = cur.take(len).ok_or_else(|| bad("truncated tensor name"))?;
        let name = std::str::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let rank = cur.u32().ok_or_else(|| bad("truncated rank"))? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32().ok_or_else(|| bad("truncated dims"))? as usize);
        }
        let n: usize = shape.iter().product();
        let payload = cur.take(n * 4).ok_or_else(|| bad("truncated payload"))?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        params.add(name, Tensor::new(shape, data)?);
    }
    if !cur.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(params)
}
