//! Dense rank-1/rank-2 tensors and a reverse-mode autodiff tape.
//!
//! Matrices follow the column-per-token convention: a sequence of `ℓ` token
//! representations of width `d` is a `d × ℓ` tensor, and vectors are `d × 1`.
//! Storage is row-major `f64`.
//!
//! [`Tensor`] is a plain value. Differentiable computation happens on a
//! [`Tape`]: leaves are registered with [`Tape::param`] or
//! [`Tape::constant`], primitive ops on [`Var`] record themselves, and
//! [`Tape::backward`] walks the record once in reverse.

mod gradcheck;
mod kernels;
mod tape;

pub use gradcheck::{compare_gradients, finite_difference_gradient, GradCheckReport, GradMismatch};
pub use tape::{Gradients, NormMode, Precision, Tape, Var};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `max(0, x)`; the derivative at 0 is taken as 0.
    Relu,
    /// `x·Φ(x)` with Φ the standard normal CDF.
    Gelu,
}

impl<'t> Var<'t> {
    pub fn activate(self, kind: Activation) -> Result<Var<'t>> {
        match kind {
            Activation::Relu => self.relu(),
            Activation::Gelu => self.gelu(),
        }
    }
}

/// Dense `rows × cols` real matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Contract(format!(
                "tensor data length {} does not match shape {rows}×{cols}",
                data.len()
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// A `d × 1` column.
    pub fn column_vector(values: &[f64]) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Contract("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Tensor::new(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut t = Tensor::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::Contract("ragged columns".into()));
            }
            for (i, &v) in c.iter().enumerate() {
                t.data[i * t.cols + j] = v;
            }
        }
        Ok(t)
    }

    /// Entries drawn i.i.d. from `Normal(0, std²)`.
    pub fn randn(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| std * rng.normal()).collect();
        Tensor { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// The single entry of a `1 × 1` tensor.
    pub fn item(&self) -> Result<f64> {
        if self.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "expected a scalar, got {}×{}",
                self.rows, self.cols
            )));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Plain (unrecorded) matrix product.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(kernels::matmul(self, other))
    }

    pub fn transpose(&self) -> Tensor {
        kernels::transpose(self)
    }

    /// Largest absolute elementwise difference. Shapes must agree.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_length() {
        assert!(Tensor::new(2, 3, vec![0.0; 5]).is_err());
        assert!(Tensor::new(2, 3, vec![0.0; 6]).is_ok());
    }

    #[test]
    fn identity_times_column() {
        let x = Tensor::column_vector(&[1.0, 2.0]);
        assert_eq!(Tensor::identity(2).matmul(&x).unwrap(), x);
    }

    #[test]
    fn zero_annihilates() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let z = Tensor::zeros(2, 1);
        assert_eq!(a.matmul(&z).unwrap(), z);
    }

    #[test]
    fn hand_product() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Tensor::column_vector(&[5.0, 6.0]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn from_columns_is_transpose_of_from_rows() {
        let rows = Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let cols = Tensor::from_columns(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(rows.transpose(), cols);
    }
}
