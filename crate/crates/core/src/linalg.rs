//! Dense row-major vectors and matrices sized for small recurrent models.
//!
//! No BLAS, no sparsity, no broadcasting: model state dimensions stay in the
//! tens here, so straightforward loops are both fast enough and auditable.
//! Diagonal matrices are never materialized; every `diag(u) * v` product in
//! the gradient formulas compiles down to [`diag_apply`].
//!
//! All free functions are pure: arguments are unmodified and results are
//! newly allocated.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    /// Wraps a non-empty buffer. Entries are expected to be finite; boundary
    /// code (file parsing, forward steps) is responsible for checking.
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("vector must not be empty".into()));
        }
        Ok(Self { data })
    }

    pub(crate) fn raw(data: Vec<T>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be at least 1");
        Self { data: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        Self::raw(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        check_len("dot", self.len(), other.len())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum())
    }

    /// Sum of squared entries.
    pub fn squared_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }
}

impl<T: Scalar> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T: Scalar> std::ops::IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimensions must be at least 1x1".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix buffer holds {} entries, expected {}x{}={}",
                data.len(),
                rows,
                cols,
                rows * cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be at least 1x1");
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.rows, other.cols)
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidArgument(
                "matrix dimensions must be at least 1x1".into(),
            ));
        }
        let cols = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {} has {} entries, expected {}",
                bad,
                rows[bad].len(),
                cols
            )));
        }
        let n_rows = rows.len();
        Ok(Self { rows: n_rows, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self += a * other`, entrywise.
    pub fn add_scaled(&mut self, a: T, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "cannot accumulate {}x{} into {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (dst, &src) in self.data.iter_mut().zip(&other.data) {
            *dst += a * src;
        }
        Ok(())
    }

    /// `self += a * u v^T` without allocating the outer product.
    pub fn add_outer(&mut self, a: T, u: &Vector<T>, v: &Vector<T>) -> Result<()> {
        if self.rows != u.len() || self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "outer product {}x{} does not fit {}x{}",
                u.len(),
                v.len(),
                self.rows,
                self.cols
            )));
        }
        for i in 0..self.rows {
            let ui = a * u.data[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (dst, &vj) in row.iter_mut().zip(&v.data) {
                *dst += ui * vj;
            }
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, a: T) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        assert!(i < self.rows && j < self.cols, "matrix index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        assert!(i < self.rows && j < self.cols, "matrix index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

fn check_len(op: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "{op}: lengths {a} and {b} differ"
        )));
    }
    Ok(())
}

/// `M v`.
pub fn matvec<T: Scalar>(m: &Matrix<T>, v: &Vector<T>) -> Result<Vector<T>> {
    if m.cols != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "matvec: matrix is {}x{}, vector has length {}",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    let mut out = Vec::with_capacity(m.rows);
    for i in 0..m.rows {
        let row = &m.data[i * m.cols..(i + 1) * m.cols];
        out.push(
            row.iter()
                .zip(v.as_slice())
                .map(|(&a, &b)| a * b)
                .sum(),
        );
    }
    Ok(Vector::raw(out))
}

/// `M^T v` without materializing the transpose.
pub fn transpose_matvec<T: Scalar>(m: &Matrix<T>, v: &Vector<T>) -> Result<Vector<T>> {
    if m.rows != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "transpose_matvec: matrix is {}x{}, vector has length {}",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    let mut out = vec![T::zero(); m.cols];
    for i in 0..m.rows {
        let vi = v[i];
        let row = &m.data[i * m.cols..(i + 1) * m.cols];
        for (acc, &a) in out.iter_mut().zip(row) {
            *acc += a * vi;
        }
    }
    Ok(Vector::raw(out))
}

/// Hadamard product; realizes `diag(u) * v` without building the matrix.
pub fn diag_apply<T: Scalar>(u: &Vector<T>, v: &Vector<T>) -> Result<Vector<T>> {
    check_len("diag_apply", u.len(), v.len())?;
    Ok(Vector::raw(
        u.iter().zip(v.iter()).map(|(&a, &b)| a * b).collect(),
    ))
}

/// Elementwise tanh.
pub fn tanh_map<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    v.map(|x| x.tanh())
}

/// `u v^T`.
pub fn outer<T: Scalar>(u: &Vector<T>, v: &Vector<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(u.len(), v.len());
    out.add_outer(T::one(), u, v).expect("shapes match by construction");
    out
}

/// `a x + y`.
pub fn axpy<T: Scalar>(a: T, x: &Vector<T>, y: &Vector<T>) -> Result<Vector<T>> {
    check_len("axpy", x.len(), y.len())?;
    Ok(Vector::raw(
        x.iter().zip(y.iter()).map(|(&xi, &yi)| a * xi + yi).collect(),
    ))
}

pub fn add<T: Scalar>(x: &Vector<T>, y: &Vector<T>) -> Result<Vector<T>> {
    check_len("add", x.len(), y.len())?;
    Ok(Vector::raw(
        x.iter().zip(y.iter()).map(|(&a, &b)| a + b).collect(),
    ))
}

pub fn sub<T: Scalar>(x: &Vector<T>, y: &Vector<T>) -> Result<Vector<T>> {
    check_len("sub", x.len(), y.len())?;
    Ok(Vector::raw(
        x.iter().zip(y.iter()).map(|(&a, &b)| a - b).collect(),
    ))
}

pub fn scale<T: Scalar>(a: T, x: &Vector<T>) -> Vector<T> {
    x.map(|v| a * v)
}

/// Stacks `a` on top of `b`.
pub fn concat<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.as_slice());
    data.extend_from_slice(b.as_slice());
    Vector::raw(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(data: &[f64]) -> Vector<f64> {
        Vector::new(data.to_vec()).unwrap()
    }

    #[test]
    fn matvec_identity_passes_through() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = matvec(&m, &v(&[3.0, 4.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn matvec_hand_case() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let out = matvec(&m, &v(&[1.0, 1.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_rejects_bad_lengths() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(
            matvec(&m, &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn transpose_matvec_hand_case() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let out = transpose_matvec(&m, &v(&[1.0, 0.0])).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn transpose_matvec_identity() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = transpose_matvec(&m, &v(&[5.0, -2.0])).unwrap();
        assert_eq!(out.as_slice(), &[5.0, -2.0]);
    }

    #[test]
    fn transpose_matvec_rejects_bad_lengths() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(
            transpose_matvec(&m, &v(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn diag_apply_ones_is_identity() {
        let ones = v(&[1.0, 1.0, 1.0]);
        let x = v(&[4.0, -1.0, 0.5]);
        assert_eq!(diag_apply(&ones, &x).unwrap(), x);
    }

    #[test]
    fn diag_apply_hand_case() {
        let out = diag_apply(&v(&[2.0, 0.0]), &v(&[3.0, 5.0])).unwrap();
        assert_eq!(out.as_slice(), &[6.0, 0.0]);
    }

    #[test]
    fn diag_apply_rejects_bad_lengths() {
        assert!(diag_apply(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn tanh_of_zero_is_zero() {
        let out = tanh_map(&v(&[0.0]));
        assert_eq!(out.as_slice(), &[0.0]);
    }

    #[test]
    fn outer_hand_case() {
        let m = outer(&v(&[1.0, 2.0]), &v(&[3.0]));
        assert_eq!(m.shape(), (2, 1));
        assert_eq!(m[(0, 0)], 3.0);
        assert_eq!(m[(1, 0)], 6.0);
    }

    #[test]
    fn axpy_zero_scale_returns_y() {
        let y = v(&[7.0, -3.0]);
        let out = axpy(0.0, &v(&[100.0, 100.0]), &y).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn vector_rejects_empty() {
        assert!(Vector::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn matrix_checks_buffer_length() {
        assert!(Matrix::new(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).is_ok());
    }

    #[test]
    fn add_outer_matches_outer() {
        let u = v(&[1.0, -2.0, 0.5]);
        let w = v(&[3.0, 4.0]);
        let mut acc = Matrix::zeros(3, 2);
        acc.add_outer(2.0, &u, &w).unwrap();
        let direct = outer(&u, &w);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(acc[(i, j)], 2.0 * direct[(i, j)]);
            }
        }
    }

    #[test]
    fn transpose_roundtrip() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.transpose().transpose(), m);
    }
}
