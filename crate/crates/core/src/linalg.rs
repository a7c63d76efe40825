//! Small dense linear algebra: row-major matrices and Gaussian elimination
//! with partial pivoting over `f64` and `Complex64`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Div, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Row vector times matrix, `v M`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (o, &m) in out.iter_mut().zip(self.row(i)) {
                    *o += vi * m;
                }
            }
        }
        out
    }

    /// Matrix times column vector, `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Solves `A x = b` for an `n × n` row-major `a`. A pivot below `1e-13`
/// times the largest entry is reported as [`Error::Pole`].
pub fn solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: a.len() });
    }
    let scale = a.iter().map(|x| x.modulus()).fold(0.0, f64::max);
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, best) = (k..n).map(|i| (i, a[i * n + k].modulus())).fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if !(best > tol) {
            return Err(Error::Pole);
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f.modulus() == 0.0 {
                continue;
            }
            for j in k..n {
                let v = a[k * n + j];
                a[i * n + j] = a[i * n + j] - f * v;
            }
            let bk = b[k];
            b[i] = b[i] - f * bk;
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s = s - a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    Ok(b)
}

pub fn solve_real(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows != a.cols || a.rows != b.len() {
        return Err(Error::DimensionMismatch { expected: a.rows, found: b.len() });
    }
    solve(a.data.clone(), b.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_real_system() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, -1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        let x = [1.5, -2.0, 0.25];
        let b = a.mul_vec(&x);
        let got = solve_real(&a, &b).unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn solves_complex_system() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let a = vec![one + i, 2.0 * one, -i, 3.0 * one];
        let x = [Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.5)];
        let b = vec![a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
        let got = solve(a, b).unwrap();
        for k in 0..2 {
            assert!((got[k] - x[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_is_a_pole() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(solve_real(&a, &[1.0, 1.0]), Err(Error::Pole)));
    }

    #[test]
    fn transpose_and_products() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.transpose().row(2), &[3.0, 6.0]);
        assert_eq!(a.left_mul(&[1.0, -1.0]), vec![-3.0, -3.0, -3.0]);
        assert_eq!(a.mul_vec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
    }
}
