// SPDX-License-Identifier: Apache-2.0
//! Dense row-major tensors.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar types the model can run on.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Send + Sync + Debug + Display + Sum + Default + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Tensor<T> {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length does not match shape {shape:?}"
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Tensor<T> {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Tensor<T> {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Tensor<T> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn scalar(x: T) -> Tensor<T> {
        Tensor::new(vec![1, 1], vec![x])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "expected a matrix, got shape {:?}", self.shape);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "expected a matrix, got shape {:?}", self.shape);
        self.shape[1]
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols() + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip(&self, other: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
        assert_eq!(self.shape, other.shape, "shape mismatch");
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        assert_eq!(self.shape, other.shape, "shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self · other` for matrices.
    pub fn matmul(&self, other: &Tensor<T>) -> Tensor<T> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        assert_eq!(k, k2, "matmul {m}x{k} by {k2}x{n}");
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let o = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let b = &other.data[p * n..(p + 1) * n];
                for (oj, &bj) in o.iter_mut().zip(b) {
                    *oj = *oj + a * bj;
                }
            }
        }
        Tensor::matrix(m, n, out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Tensor<T>) -> Tensor<T> {
        let (k, m) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        assert_eq!(k, k2);
        let mut out = vec![T::zero(); m * n];
        for p in 0..k {
            let b = &other.data[p * n..(p + 1) * n];
            for i in 0..m {
                let a = self.data[p * m + i];
                if a == T::zero() {
                    continue;
                }
                let o = &mut out[i * n..(i + 1) * n];
                for (oj, &bj) in o.iter_mut().zip(b) {
                    *oj = *oj + a * bj;
                }
            }
        }
        Tensor::matrix(m, n, out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Tensor<T>) -> Tensor<T> {
        let (m, k) = (self.rows(), self.cols());
        let (n, k2) = (other.rows(), other.cols());
        assert_eq!(k, k2);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * n + j] = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
            }
        }
        Tensor::matrix(m, n, out)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|x| U::from_f64(x.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::<f64>::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::<f64>::matrix(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
        let at = Tensor::<f64>::matrix(3, 2, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(at.t_matmul(&b), c);
        let bt = Tensor::<f64>::matrix(2, 3, vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);
        assert_eq!(a.matmul_t(&bt), c);
    }
}
