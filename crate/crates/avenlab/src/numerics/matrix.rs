//! Dense row-major matrix with the value-level kernels shared by the
//! autodiff tape and plain inference paths.

use rand::Rng;
use rand_distr::StandardNormal;

use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix<R: Real = f32> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> std::fmt::Debug for Matrix<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)
    }
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: R) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> R) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Entries drawn i.i.d. from N(0, std^2).
    pub fn random_normal(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                R::from_f64(z * std)
            })
            .collect();
        Matrix { rows, cols, data }
    }

    /// Entries drawn i.i.d. uniformly from [lo, hi).
    pub fn random_uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| R::from_f64(rng.gen_range(lo..hi)))
            .collect();
        Matrix { rows, cols, data }
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline(always)]
    pub fn get(&self, r: usize, c: usize) -> R {
        self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn set(&mut self, r: usize, c: usize, v: R) {
        self.data[r * self.cols + c] = v;
    }

    #[inline(always)]
    pub fn row(&self, r: usize) -> &[R] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, r: usize) -> &mut [R] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[R] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Real>(&self) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul inner dimensions {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let (m, n) = (self.rows, other.cols);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(R, R) -> R) -> Self {
        assert!(self.same_shape(other), "zip_map shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, factor: R) -> Self {
        self.map(|v| v * factor)
    }

    /// self += other * factor, in place.
    pub fn add_scaled(&mut self, other: &Self, factor: R) {
        assert!(self.same_shape(other), "add_scaled shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b * factor;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert!(self.same_shape(other), "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn fill(&mut self, v: R) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Broadcast-add a 1xC row vector to every row.
    pub fn add_row_broadcast(&self, row: &Self) -> Self {
        assert_eq!(row.rows, 1, "bias must be a row vector");
        assert_eq!(row.cols, self.cols, "bias width mismatch");
        let mut out = self.clone();
        for r in 0..out.rows {
            for (o, &b) in out.row_mut(r).iter_mut().zip(row.data.iter()) {
                *o += b;
            }
        }
        out
    }

    /// Sum of all entries, accumulated in f64.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64()).sum()
    }

    /// Mean of |entry| over all entries, accumulated in f64.
    pub fn mean_abs_f64(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.to_f64().abs()).sum::<f64>() / self.data.len() as f64
    }

    /// Mean of |a - b| over all entries, accumulated in f64.
    pub fn mean_abs_diff_f64(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "mean_abs_diff shape mismatch");
        if self.data.is_empty() {
            return 0.0;
        }
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .sum::<f64>()
            / self.data.len() as f64
    }

    pub fn max_abs_f64(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Shared value kernels. The tape's forward pass and any plain inference path
// go through these, so both produce bitwise-identical values.
// ---------------------------------------------------------------------------

const GELU_C: f64 = 0.797884560802865; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

#[inline(always)]
pub(crate) fn gelu_f64(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

#[inline(always)]
pub(crate) fn gelu_grad_f64(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) fn gelu_val<R: Real>(x: &Matrix<R>) -> Matrix<R> {
    x.map(|v| R::from_f64(gelu_f64(v.to_f64())))
}

pub(crate) fn relu_val<R: Real>(x: &Matrix<R>) -> Matrix<R> {
    x.map(|v| if v > R::zero() { v } else { R::zero() })
}

/// Row-wise layer normalization: each row to zero mean / unit variance
/// (eps-stabilized), then per-column gain and bias. Statistics in f64.
pub(crate) fn layer_norm_val<R: Real>(
    x: &Matrix<R>,
    gain: &Matrix<R>,
    bias: &Matrix<R>,
    eps: f64,
) -> Matrix<R> {
    let n = x.cols() as f64;
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().map(|v| v.to_f64()).sum::<f64>() / n;
        let var = row
            .iter()
            .map(|v| {
                let d = v.to_f64() - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        let inv = 1.0 / (var + eps).sqrt();
        let o = out.row_mut(r);
        for c in 0..row.len() {
            let xhat = (row[c].to_f64() - mean) * inv;
            o[c] = R::from_f64(xhat * gain.as_slice()[c].to_f64() + bias.as_slice()[c].to_f64());
        }
    }
    out
}

/// Numerically stabilized softmax over each row (max subtraction, f64).
pub(crate) fn softmax_rows_val<R: Real>(x: &Matrix<R>) -> Matrix<R> {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        let mut exps = vec![0.0f64; row.len()];
        for (c, v) in row.iter().enumerate() {
            let e = (v.to_f64() - max).exp();
            exps[c] = e;
            denom += e;
        }
        let o = out.row_mut(r);
        for c in 0..row.len() {
            o[c] = R::from_f64(exps[c] / denom);
        }
    }
    out
}

/// Depthwise 1-D convolution along the row (time) axis with symmetric zero
/// padding: output length equals input length. `kernels` is width x cols,
/// one kernel per feature column.
pub(crate) fn depthwise_conv_val<R: Real>(x: &Matrix<R>, kernels: &Matrix<R>) -> Matrix<R> {
    let width = kernels.rows();
    let half = width / 2;
    let (t_len, d) = x.shape();
    let mut out = Matrix::zeros(t_len, d);
    for t in 0..t_len {
        let o = t * d;
        for w in 0..width {
            let src = t as isize + w as isize - half as isize;
            if src < 0 || src >= t_len as isize {
                continue;
            }
            let s = src as usize * d;
            let k = w * d;
            for c in 0..d {
                out.data[o + c] += kernels.data[k + c] * x.data[s + c];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_hand_case() {
        let a = Matrix::<f32>::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::<f32>::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_identity() {
        let id = Matrix::<f32>::from_fn(2, 2, |r, c| if r == c { 1.0 } else { 0.0 });
        let m = Matrix::<f32>::from_vec(2, 2, vec![0.5, -1.5, 2.0, 7.25]).unwrap();
        assert_eq!(id.matmul(&m).as_slice(), m.as_slice());
    }

    #[test]
    fn transpose_round_trip() {
        let m = Matrix::<f32>::from_fn(3, 4, |r, c| (r * 4 + c) as f32);
        assert_eq!(m.transpose().transpose().as_slice(), m.as_slice());
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Matrix::<f32>::from_vec(2, 2, vec![1.0]).is_err());
    }
}
