//! Binary parameter checkpoints.
//!
//! Layout: the magic line `MLNS1\n`, then per parameter a text line
//! `name dim0 dim1 ...\n` followed by `product(dims)` little-endian `f64`s.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8] = b"MLNS1\n";

pub fn encode_checkpoint(params: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let payload: usize = params.iter().map(|(n, t)| n.len() + 16 + 8 * t.numel()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + payload);
    out.extend_from_slice(MAGIC);
    for (name, tensor) in params {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("parameter name {name:?} must be nonempty without whitespace")));
        }
        out.extend_from_slice(name.as_bytes());
        for d in tensor.shape() {
            out.extend_from_slice(format!(" {d}").as_bytes());
        }
        out.push(b'\n');
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut rest = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::format("checkpoint", "missing MLNS1 magic"))?;
    let mut params = Vec::new();
    while !rest.is_empty() {
        let eol = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("checkpoint", "unterminated parameter header"))?;
        let header = std::str::from_utf8(&rest[..eol])
            .map_err(|_| Error::format("checkpoint", "parameter header is not UTF-8"))?;
        rest = &rest[eol + 1..];
        let mut fields = header.split(' ');
        let name = fields.next().unwrap_or_default().to_string();
        let shape = fields
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::format("checkpoint", format!("bad dimensions in header {header:?}")))?;
        if name.is_empty() || shape.is_empty() {
            return Err(Error::format("checkpoint", format!("bad header {header:?}")));
        }
        let numel: usize = shape.iter().product();
        let need = numel * 8;
        if rest.len() < need {
            return Err(Error::Truncated { format: "checkpoint", expected: need, actual: rest.len() });
        }
        let data = rest[..need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        rest = &rest[need..];
        params.push((name, Tensor::new(shape, data)?));
    }
    Ok(params)
}

pub fn save_checkpoint(path: &Path, params: &[(String, Tensor)]) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
