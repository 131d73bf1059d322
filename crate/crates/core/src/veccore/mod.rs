//! Dense-vector primitives: normalization, similarity, affine maps and the
//! portable RNG.
//!
//! Vectors are stored as `f32`; dot products and norms accumulate in `f64`.

pub mod rng;

pub use rng::{derive_seed, fnv1a64, Rng};

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero.
pub const MIN_NORM: f64 = 1e-12;

/// Row-major dense matrix of `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

pub fn norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

pub fn squared_distance(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum()
}

pub fn l2_normalize(v: &[f32]) -> Result<Vec<f32>> {
    if v.is_empty() {
        return Err(Error::InvalidDimension("empty vector".into()));
    }
    let n = norm(v);
    if !n.is_finite() {
        return Err(Error::NonFinite("vector".into()));
    }
    if n <= MIN_NORM {
        return Err(Error::ZeroNorm { norm: n });
    }
    Ok(v.iter().map(|&x| (x as f64 / n) as f32).collect())
}

pub fn cosine_sim(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    for n in [nu, nv] {
        if n <= MIN_NORM {
            return Err(Error::ZeroNorm { norm: n });
        }
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `W x + b`.
pub fn affine_forward(w: &Matrix, b: &[f32], x: &[f32]) -> Result<Vec<f32>> {
    if w.cols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: w.cols(),
            got: x.len(),
        });
    }
    if w.rows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: w.rows(),
            got: b.len(),
        });
    }
    Ok((0..w.rows())
        .map(|r| (dot(w.row(r), x) + b[r] as f64) as f32)
        .collect())
}

/// `c ← a·b + beta·c` for an `m×k` by `k×n` product in f64. Strides are
/// (row, column) element offsets; `c` is dense row-major.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    sa: (isize, isize),
    b: &[f64],
    sb: (isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    let last = |rows: usize, cols: usize, s: (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * s.0 + (cols as isize - 1) * s.1
        }
    };
    assert!(last(m, k, sa) < a.len() as isize || m * k == 0);
    assert!(last(k, n, sb) < b.len() as isize || k * n == 0);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0,
            sa.1,
            b.as_ptr(),
            sb.0,
            sb.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn all_finite(v: &[f32]) -> bool {
    v.iter().all(|x| x.is_finite())
}
