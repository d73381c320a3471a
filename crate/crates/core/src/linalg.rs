//! Dense tensors and exact rational linear algebra kernels.

use crate::rational::{Rational, Scalar};

/// Cubic 3-index array `t[i][j][k]` with every index in `0..dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 {
            dim,
            data: vec![T::zero(); dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let p = self.idx(i, j, k);
        self.data[p] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, k: usize, v: T) {
        let p = self.idx(i, j, k);
        self.data[p] = self.data[p] + v;
    }

    /// The vector `t[i][j][·]`.
    pub fn fiber(&self, i: usize, j: usize) -> Vec<T> {
        let start = self.idx(i, j, 0);
        self.data[start..start + self.dim].to_vec()
    }

    pub fn set_fiber(&mut self, i: usize, j: usize, v: &[T]) {
        let start = self.idx(i, j, 0);
        self.data[start..start + self.dim].copy_from_slice(v);
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor3<U> {
        Tensor3 {
            dim: self.dim,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Tensor3<T>, f: impl Fn(T, T) -> T) -> Tensor3<T> {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        Tensor3 {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_negligible())
    }
}

/// Cubic 4-index array `t[i][j][k][l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(dim: usize) -> Self {
        Tensor4 {
            dim,
            data: vec![T::zero(); dim * dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.data[self.idx(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: T) {
        let p = self.idx(i, j, k, l);
        self.data[p] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, k: usize, l: usize, v: T) {
        let p = self.idx(i, j, k, l);
        self.data[p] = self.data[p] + v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor4<U> {
        Tensor4 {
            dim: self.dim,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Tensor4<T>, f: impl Fn(T, T) -> T) -> Tensor4<T> {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        Tensor4 {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_negligible())
    }
}

/// Dense row-major matrix over any scalar; the elimination routines assume
/// exact arithmetic and are only used with [`Rational`].
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type QMatrix = Matrix<Rational>;

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<T>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged matrix columns");
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
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

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    /// Bilinear form `xᵀ M y`.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        let my = self.mul_vec(y);
        x.iter()
            .zip(&my)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_skew(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| (self[(i, j)] + self[(j, i)]).is_negligible()))
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self[(i, c)] != T::zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = T::one() / self[(r, c)];
            for j in 0..self.cols {
                self[(r, j)] = self[(r, j)] * inv;
            }
            for i in 0..self.rows {
                if i != r {
                    let f = self[(i, c)];
                    if f != T::zero() {
                        for j in 0..self.cols {
                            self[(i, j)] = self[(i, j)] - f * self[(r, j)];
                        }
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Inverse of a square matrix, or `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)];
            }
            aug[(i, n + i)] = T::one();
        }
        let piv = aug.rref();
        if piv.len() < n || piv[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[(i, n + j)];
            }
        }
        Some(inv)
    }

    /// Solves `self · x = b`. Returns `Err(rank)` when the system is
    /// inconsistent, and the solution with all free variables set to zero
    /// together with the number of free variables otherwise.
    pub fn solve(&self, b: &[T]) -> Result<(Vec<T>, usize), SolveFailure> {
        assert_eq!(self.rows, b.len(), "right-hand side length mismatch");
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)];
            }
            aug[(i, self.cols)] = b[i];
        }
        let piv = aug.rref();
        if piv.last() == Some(&self.cols) {
            return Err(SolveFailure::Inconsistent);
        }
        let mut x = vec![T::zero(); self.cols];
        for (r, &c) in piv.iter().enumerate() {
            x[c] = aug[(r, self.cols)];
        }
        Ok((x, self.cols - piv.len()))
    }

    /// Determinant by Gaussian elimination (exact for rationals).
    pub fn determinant(&self) -> T {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut m = self.clone();
        let mut det = T::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| m[(i, c)] != T::zero()) else {
                return T::zero();
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let pv = m[(c, c)];
            det = det * pv;
            for i in c + 1..n {
                let f = m[(i, c)] / pv;
                if f != T::zero() {
                    for j in c..n {
                        m[(i, j)] = m[(i, j)] - f * m[(c, j)];
                    }
                }
            }
        }
        det
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveFailure {
    Inconsistent,
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Pfaffian of a skew-symmetric matrix of even size, by expansion along the
/// first row. Intended for the small sizes (at most 8) used here.
pub fn pfaffian<T: Scalar>(m: &Matrix<T>) -> T {
    let idx: Vec<usize> = (0..m.rows()).collect();
    pfaffian_rec(m, &idx)
}

fn pfaffian_rec<T: Scalar>(m: &Matrix<T>, idx: &[usize]) -> T {
    if idx.is_empty() {
        return T::one();
    }
    if idx.len() % 2 == 1 {
        return T::zero();
    }
    let first = idx[0];
    let mut total = T::zero();
    for (pos, &j) in idx.iter().enumerate().skip(1) {
        let a = m[(first, j)];
        if a == T::zero() {
            continue;
        }
        let rest: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != 0 && p != pos)
            .map(|(_, &v)| v)
            .collect();
        let term = a * pfaffian_rec(m, &rest);
        total = if pos % 2 == 1 {
            total + term
        } else {
            total - term
        };
    }
    total
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn axpy<T: Scalar>(a: T, x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&xi, &yi)| a * xi + yi).collect()
}

pub fn scale<T: Scalar>(a: T, x: &[T]) -> Vec<T> {
    x.iter().map(|&v| a * v).collect()
}

pub fn unit<T: Scalar>(dim: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); dim];
    v[i] = T::one();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn inverse_round_trip() {
        let m = QMatrix::from_rows(&[vec![q(2, 1), q(1, 1)], vec![q(1, 3), q(-1, 2)]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), QMatrix::identity(2));
    }

    #[test]
    fn singular_has_no_inverse() {
        let m = QMatrix::from_rows(&[vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]]);
        assert!(m.inverse().is_none());
        assert_eq!(m.rank(), 1);
        assert_eq!(m.determinant(), Rational::ZERO);
    }

    #[test]
    fn solve_reports_inconsistency_and_freedom() {
        let m = QMatrix::from_rows(&[vec![q(1, 1), q(1, 1)], vec![q(2, 1), q(2, 1)]]);
        assert_eq!(
            m.solve(&[q(1, 1), q(3, 1)]),
            Err(SolveFailure::Inconsistent)
        );
        let (x, free) = m.solve(&[q(1, 1), q(2, 1)]).unwrap();
        assert_eq!(free, 1);
        assert_eq!(m.mul_vec(&x), vec![q(1, 1), q(2, 1)]);
    }

    #[test]
    fn pfaffian_squares_to_determinant() {
        let rows = vec![
            vec![q(0, 1), q(1, 1), q(2, 1), q(-1, 2)],
            vec![q(-1, 1), q(0, 1), q(3, 1), q(1, 1)],
            vec![q(-2, 1), q(-3, 1), q(0, 1), q(5, 3)],
            vec![q(1, 2), q(-1, 1), q(-5, 3), q(0, 1)],
        ];
        let m = QMatrix::from_rows(&rows);
        let pf = pfaffian(&m);
        assert_eq!(pf * pf, m.determinant());
        // a12 a34 − a13 a24 + a14 a23
        assert_eq!(
            pf,
            q(1, 1) * q(5, 3) - q(2, 1) * q(1, 1) + q(-1, 2) * q(3, 1)
        );
    }
}
