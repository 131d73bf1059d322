//! `PROJHD01` head files, little-endian:
//!
//! ```text
//! magic        8 bytes  "PROJHD01"
//! layer_count  u32
//! per layer:
//!   rows       u32      output width
//!   cols       u32      input width
//!   activation u8       0 = identity, 1 = relu
//!   weight     rows x cols f32, row-major
//!   bias       rows f32
//! ```

use std::fs;
use std::path::Path;

use super::head::{Activation, Layer, ProjectionHead};
use crate::error::{Error, Result};
use crate::veccore::Matrix;

pub const HEAD_MAGIC: &[u8; 8] = b"PROJHD01";

pub fn encode_head(head: &ProjectionHead) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(HEAD_MAGIC);
    out.extend_from_slice(&(head.layers().len() as u32).to_le_bytes());
    for l in head.layers() {
        out.extend_from_slice(&(l.weight.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(l.weight.cols() as u32).to_le_bytes());
        out.push(l.activation.code());
        for x in l.weight.as_slice().iter().chain(&l.bias) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_head(bytes: &[u8]) -> Result<ProjectionHead> {
    if bytes.len() < 8 || &bytes[..8] != HEAD_MAGIC {
        return Err(Error::BadMagic { expected: "PROJHD01" });
    }
    let mut pos = 8;
    let mut take = |n: usize| -> Result<&[u8]> {
        if bytes.len() - pos < n {
            return Err(Error::TruncatedFile(format!("head file at byte {pos}")));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap()) as usize;
    let count = read_u32(take(4)?);
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let rows = read_u32(take(4)?);
        let cols = read_u32(take(4)?);
        let activation = Activation::from_code(take(1)?[0])?;
        let n = rows
            .checked_mul(cols)
            .and_then(|w| w.checked_add(rows))
            .ok_or_else(|| Error::Malformed("layer size overflows".into()))?;
        let raw = take(4 * n)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("head weights".into()));
        }
        layers.push(Layer {
            weight: Matrix::from_vec(rows, cols, values[..rows * cols].to_vec())?,
            bias: values[rows * cols..].to_vec(),
            activation,
        });
    }
    if pos != bytes.len() {
        return Err(Error::Malformed("trailing bytes after head".into()));
    }
    ProjectionHead::new(layers)
}

pub fn write_head(head: &ProjectionHead, path: &Path) -> Result<()> {
    fs::write(path, encode_head(head))?;
    Ok(())
}

pub fn read_head(path: &Path) -> Result<ProjectionHead> {
    decode_head(&fs::read(path)?)
}
