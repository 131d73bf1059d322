//! Model files, little-endian.
//!
//! ```text
//! SVMMDL01  u32 dim, u32 n_sv, f64 gamma, f64 C, f64 bias,
//!           u8 converged, u64 iterations,
//!           per support vector: u32 train_index, f64 coefficient, dim x f32
//! MLPMDL01  u32 input, u32 hidden, u32 epochs_run, f64 final_loss,
//!           w1 hidden x input f32, b1 hidden f32, w2 2 x hidden f32, b2 2 f32
//! ```

use std::fs;
use std::path::Path;

use super::mlp::MlpModel;
use super::svm::SvmModel;
use crate::error::{Error, Result};
use crate::veccore::Matrix;

pub const SVM_MAGIC: &[u8; 8] = b"SVMMDL01";
pub const MLP_MAGIC: &[u8; 8] = b"MLPMDL01";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], magic: &'static [u8; 8], what: &'static str) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != magic {
            return Err(Error::BadMagic {
                expected: std::str::from_utf8(magic).unwrap(),
            });
        }
        Ok(Self { bytes, pos: 8, what })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::TruncatedFile(format!("{} at byte {}", self.what, self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::Malformed(format!("{} size overflows", self.what)))?;
        let v: Vec<f32> = self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{} weights", self.what)));
        }
        Ok(v)
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Malformed(format!("trailing bytes after {}", self.what)));
        }
        Ok(())
    }
}

fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode_svm(m: &SvmModel) -> Vec<u8> {
    let mut out = SVM_MAGIC.to_vec();
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(m.support_vectors.len() as u32).to_le_bytes());
    for v in [m.gamma, m.c, m.bias] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(u8::from(m.converged));
    out.extend_from_slice(&m.iterations.to_le_bytes());
    for ((sv, a), idx) in m.support_vectors.iter().zip(&m.coefficients).zip(&m.support_indices) {
        out.extend_from_slice(&(*idx as u32).to_le_bytes());
        out.extend_from_slice(&a.to_le_bytes());
        put_f32s(&mut out, sv);
    }
    out
}

pub fn decode_svm(bytes: &[u8]) -> Result<SvmModel> {
    let mut r = Reader::open(bytes, SVM_MAGIC, "svm model")?;
    let dim = r.u32()?;
    let n = r.u32()?;
    let (gamma, c, bias) = (r.f64()?, r.f64()?, r.f64()?);
    let converged = match r.u8()? {
        0 => false,
        1 => true,
        x => return Err(Error::Malformed(format!("converged flag {x}"))),
    };
    let iterations = r.u64()?;
    if n == 0 {
        return Err(Error::Malformed("svm model without support vectors".into()));
    }
    let mut model = SvmModel {
        support_vectors: Vec::with_capacity(n.min(1 << 16)),
        coefficients: Vec::new(),
        support_indices: Vec::new(),
        bias,
        gamma,
        c,
        converged,
        iterations,
    };
    for _ in 0..n {
        model.support_indices.push(r.u32()?);
        model.coefficients.push(r.f64()?);
        model.support_vectors.push(r.f32s(dim)?);
    }
    r.finish()?;
    Ok(model)
}

pub fn encode_mlp(m: &MlpModel) -> Vec<u8> {
    let mut out = MLP_MAGIC.to_vec();
    for v in [m.input_dim(), m.hidden(), m.epochs_run] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&m.final_loss.to_le_bytes());
    for part in [m.w1.as_slice(), &m.b1, m.w2.as_slice(), &m.b2] {
        put_f32s(&mut out, part);
    }
    out
}

pub fn decode_mlp(bytes: &[u8]) -> Result<MlpModel> {
    let mut r = Reader::open(bytes, MLP_MAGIC, "mlp model")?;
    let input = r.u32()?;
    let hidden = r.u32()?;
    let epochs_run = r.u32()?;
    let final_loss = r.f64()?;
    if input == 0 || hidden == 0 {
        return Err(Error::Malformed("mlp model with empty layer".into()));
    }
    let w1 = r.f32s(hidden.saturating_mul(input))?;
    let b1 = r.f32s(hidden)?;
    let w2 = r.f32s(2 * hidden)?;
    let b2 = r.f32s(2)?;
    r.finish()?;
    Ok(MlpModel {
        w1: Matrix::from_vec(hidden, input, w1)?,
        b1,
        w2: Matrix::from_vec(2, hidden, w2)?,
        b2,
        epochs_run,
        final_loss,
    })
}

pub fn write_svm(m: &SvmModel, path: &Path) -> Result<()> {
    fs::write(path, encode_svm(m))?;
    Ok(())
}

pub fn read_svm(path: &Path) -> Result<SvmModel> {
    decode_svm(&fs::read(path)?)
}

pub fn write_mlp(m: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, encode_mlp(m))?;
    Ok(())
}

pub fn read_mlp(path: &Path) -> Result<MlpModel> {
    decode_mlp(&fs::read(path)?)
}
