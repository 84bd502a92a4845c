//! TSR3 binary tensor format: the magic `TSR3`, three little-endian `u32`
//! dimensions `n1 n2 n3`, then `n1 n2 n3` little-endian `f64` values with the
//! frontal slice index outermost, then the row, then the column.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

pub const MAGIC: &[u8; 4] = b"TSR3";
const HEADER_LEN: usize = 16;

pub fn encode(t: &Tensor3) -> Result<Vec<u8>> {
    let (n1, n2, n3) = t.dims();
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(MAGIC);
    for n in [n1, n2, n3] {
        out.extend_from_slice(&dim(n)?.to_le_bytes());
    }
    for k in 0..n3 {
        for i in 0..n1 {
            for j in 0..n2 {
                out.extend_from_slice(&t.get(i, j, k).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Tensor3> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing TSR3 header".into()));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (n1, n2, n3) = (word(4), word(8), word(12));
    let len = n1
        .checked_mul(n2)
        .and_then(|v| v.checked_mul(n3))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != len * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes for {n1}x{n2}x{n3}, found {}",
            len * 8,
            body.len()
        )));
    }
    let mut t = Tensor3::zeros(n1, n2, n3);
    let mut chunks = body.chunks_exact(8);
    for k in 0..n3 {
        for i in 0..n1 {
            for j in 0..n2 {
                let v = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
                t.set(i, j, k, v);
            }
        }
    }
    Ok(t)
}
