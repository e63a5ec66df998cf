//! Dense row-major storage and the handful of kernels the solvers share.
//!
//! Every reduction here accumulates sequentially in ascending index order so
//! that two runs over the same data produce the same bits. Vectors are plain
//! `Vec<f64>` / `&[f64]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::invalid("rows", "matrix needs at least one row"));
        }
        if cols == 0 {
            return Err(Error::invalid("cols", "matrix needs at least one column"));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    context: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Square matrix with `diag` on the diagonal.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// Top-left `rows × cols` submatrix.
    pub fn top_left(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::invalid(
                "crop",
                format!(
                    "{rows}x{cols} does not fit inside {}x{}",
                    self.rows, self.cols
                ),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend_from_slice(&self.row(i)[..cols]);
        }
        Self::from_vec(rows, cols, data)
    }

    /// Rows `lo..=hi` as a new matrix.
    pub fn row_block(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo > hi || hi >= self.rows {
            return Err(Error::Range {
                lo,
                hi,
                rows: self.rows,
            });
        }
        let data = self.data[lo * self.cols..(hi + 1) * self.cols].to_vec();
        Self::from_vec(hi - lo + 1, self.cols, data)
    }

    /// `A·x`
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("A·x", self.cols, x.len())?;
        Ok(self.row_iter().map(|r| dot_unchecked(r, x)).collect())
    }

    /// `Aᵀ·y`, accumulated row by row.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("Aᵀ·y", self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (r, &yi) in self.row_iter().zip(y) {
            axpy_unchecked(&mut out, yi, r);
        }
        Ok(out)
    }

    /// Σ A[i][j]² by direct double sum.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Σ uᵢ·vᵢ, index ascending.
pub fn dot(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len("dot", u.len(), v.len())?;
    Ok(dot_unchecked(u, v))
}

#[inline]
pub(crate) fn dot_unchecked(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = 0.0;
    for (a, b) in u.iter().zip(v) {
        acc += a * b;
    }
    acc
}

/// ⟨row, x + d⟩ without materialising x + d. With `d = 0` this is bitwise
/// equal to `dot(row, x)`.
#[inline]
pub(crate) fn dot_shifted(row: &[f64], x: &[f64], d: &[f64]) -> f64 {
    debug_assert_eq!(row.len(), x.len());
    debug_assert_eq!(row.len(), d.len());
    let mut acc = 0.0;
    for ((a, xi), di) in row.iter().zip(x).zip(d) {
        acc += a * (xi + di);
    }
    acc
}

/// x ← x + scale·row
pub fn axpy_row(x: &mut [f64], scale: f64, row: &[f64]) -> Result<()> {
    check_len("axpy_row", row.len(), x.len())?;
    axpy_unchecked(x, scale, row);
    Ok(())
}

#[inline]
pub(crate) fn axpy_unchecked(x: &mut [f64], scale: f64, row: &[f64]) {
    debug_assert_eq!(x.len(), row.len());
    for (xi, ri) in x.iter_mut().zip(row) {
        *xi += scale * ri;
    }
}

pub fn norm_sq(u: &[f64]) -> f64 {
    dot_unchecked(u, u)
}

pub fn norm(u: &[f64]) -> f64 {
    norm_sq(u).sqrt()
}

/// ‖x − y‖²
pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

/// ‖A·x − b‖
pub fn residual_norm(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (r, bi) in a.row_iter().zip(b) {
        let d = dot_unchecked(r, x) - bi;
        acc += d * d;
    }
    acc.sqrt()
}

/// Squared row norms and their total, validated to be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct RowNormCache {
    sq_norms: Vec<f64>,
    frobenius_sq: f64,
}

impl RowNormCache {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let mut sq_norms = Vec::with_capacity(a.rows());
        for (i, r) in a.row_iter().enumerate() {
            let s = norm_sq(r);
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::DegenerateRow { row: i });
            }
            sq_norms.push(s);
        }
        let frobenius_sq = sq_norms.iter().sum();
        Ok(Self {
            sq_norms,
            frobenius_sq,
        })
    }

    #[inline]
    pub fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    #[inline]
    pub fn sq_norm(&self, i: usize) -> f64 {
        self.sq_norms[i]
    }

    #[inline]
    pub fn frobenius_sq(&self) -> f64 {
        self.frobenius_sq
    }
}

/// `⌊t·len/parts⌋ .. ⌊(t+1)·len/parts⌋` as a half-open range.
pub fn block_bounds(t: usize, parts: usize, len: usize) -> std::ops::Range<usize> {
    let lo = (t as u128 * len as u128 / parts as u128) as usize;
    let hi = ((t as u128 + 1) * len as u128 / parts as u128) as usize;
    lo..hi
}
