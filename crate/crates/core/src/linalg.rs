//! Small dense matrices and block-tridiagonal factorizations.
//!
//! Everything the sampler touches per county is at most `N_g·N_t` wide and
//! block-tridiagonal in time, so these routines stay deliberately small and
//! generic over [`Real`]. The graph eigendecomposition, which is large and
//! only needed outside inference, goes through `nalgebra` instead.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds from row-major data; panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec length mismatch");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Self {
        let rows: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self' x`.
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "tr_matvec shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn add(&self, other: &Mat<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    pub fn add_assign(&mut self, other: &Mat<T>) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Adds `s · x xᵀ`.
    pub fn add_outer(&mut self, x: &[T], y: &[T], s: T) {
        assert_eq!((self.rows, self.cols), (x.len(), y.len()));
        for (i, &xi) in x.iter().enumerate() {
            let a = s * xi;
            for (d, &yj) in self.row_mut(i).iter_mut().zip(y) {
                *d += a * yj;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Mat<T>) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn trace(&self) -> T {
        self.diag().into_iter().sum()
    }

    /// Replaces the matrix with `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in 0..i {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::new(self)
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Mat<T>) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Mat::from_fn(r, c, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Lower Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Mat<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &Mat<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { what: "cholesky", expected: a.rows, found: a.cols });
        }
        let n = a.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "pivot {j} of {n}x{n} matrix is {d:e}"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &Mat<T> {
        &self.l
    }

    pub fn into_factor(self) -> Mat<T> {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        solve_lower_in_place(&self.l, b);
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        solve_lower_transpose_in_place(&self.l, b);
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn solve_mat(&self, b: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(b.rows, b.cols);
        let mut col = vec![T::zero(); b.rows];
        for j in 0..b.cols {
            for i in 0..b.rows {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..b.rows {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> Mat<T> {
        let mut inv = self.solve_mat(&Mat::identity(self.dim()));
        inv.symmetrize();
        inv
    }

    /// `log |A|`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        self.l.diag().into_iter().map(|d| two * d.ln()).sum()
    }

    /// `xᵀ A⁻¹ x`.
    pub fn inv_quad(&self, x: &[T]) -> T {
        let mut y = x.to_vec();
        self.solve_lower_in_place(&mut y);
        dot(&y, &y)
    }

    /// `L x`.
    pub fn lower_mul(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n).map(|i| dot(&self.l.row(i)[..=i], &x[..=i])).collect()
    }
}

pub fn solve_lower_in_place<T: Real>(l: &Mat<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let row = l.row(i);
        let s = b[i] - dot(&row[..i], &b[..i]);
        b[i] = s / row[i];
    }
}

pub fn solve_lower_transpose_in_place<T: Real>(l: &Mat<T>, b: &mut [T]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse<T: Real>(a: &Mat<T>) -> Result<Mat<T>> {
    Ok(Cholesky::new(a)?.inverse())
}

/// Symmetric block-tridiagonal matrix with square blocks of equal size.
///
/// `diag[t]` is block `(t, t)` and `sub[t]` is block `(t + 1, t)`.
#[derive(Clone, Debug)]
pub struct BlockTridiag<T> {
    pub diag: Vec<Mat<T>>,
    pub sub: Vec<Mat<T>>,
}

impl<T: Real> BlockTridiag<T> {
    pub fn zeros(n_blocks: usize, block: usize) -> Self {
        BlockTridiag {
            diag: (0..n_blocks).map(|_| Mat::zeros(block, block)).collect(),
            sub: (0..n_blocks.saturating_sub(1)).map(|_| Mat::zeros(block, block)).collect(),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, Mat::rows)
    }

    pub fn dim(&self) -> usize {
        self.n_blocks() * self.block_size()
    }

    pub fn scale(&self, s: T) -> Self {
        BlockTridiag {
            diag: self.diag.iter().map(|m| m.scale(s)).collect(),
            sub: self.sub.iter().map(|m| m.scale(s)).collect(),
        }
    }

    /// Adds `d` to the main diagonal (flattened indexing).
    pub fn add_diagonal(&mut self, d: &[T]) {
        let b = self.block_size();
        assert_eq!(d.len(), self.dim());
        for (t, blk) in self.diag.iter_mut().enumerate() {
            for k in 0..b {
                blk[(k, k)] += d[t * b + k];
            }
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let b = self.block_size();
        let n = self.n_blocks();
        assert_eq!(x.len(), n * b);
        let mut y = vec![T::zero(); n * b];
        for t in 0..n {
            let xt = &x[t * b..(t + 1) * b];
            add_into(&mut y[t * b..(t + 1) * b], &self.diag[t].matvec(xt));
            if t + 1 < n {
                let s = &self.sub[t];
                add_into(&mut y[(t + 1) * b..(t + 2) * b], &s.matvec(xt));
                add_into(&mut y[t * b..(t + 1) * b], &s.tr_matvec(&x[(t + 1) * b..(t + 2) * b]));
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.matvec(x))
    }

    pub fn to_dense(&self) -> Mat<T> {
        let b = self.block_size();
        let n = self.n_blocks();
        let mut m = Mat::zeros(n * b, n * b);
        for t in 0..n {
            for i in 0..b {
                for j in 0..b {
                    m[(t * b + i, t * b + j)] = self.diag[t][(i, j)];
                    if t + 1 < n {
                        let v = self.sub[t][(i, j)];
                        m[((t + 1) * b + i, t * b + j)] = v;
                        m[(t * b + j, (t + 1) * b + i)] = v;
                    }
                }
            }
        }
        m
    }

    pub fn cholesky(&self) -> Result<BlockTridiagCholesky<T>> {
        let n = self.n_blocks();
        let mut diag: Vec<Cholesky<T>> = Vec::with_capacity(n);
        let mut sub: Vec<Mat<T>> = Vec::with_capacity(n.saturating_sub(1));
        for t in 0..n {
            let mut a = self.diag[t].clone();
            if t > 0 {
                // a -= C Cᵀ with C = L_{t,t-1}
                let c: &Mat<T> = &sub[t - 1];
                let cct = c.matmul(&c.transpose());
                a = a.sub(&cct);
            }
            let ch = Cholesky::new(&a).map_err(|e| match e {
                Error::NotPositiveDefinite(m) => {
                    Error::NotPositiveDefinite(format!("block {t} of block-tridiagonal matrix: {m}"))
                }
                other => other,
            })?;
            if t + 1 < n {
                // L_{t+1,t} = A_{t+1,t} L_tt^{-T}: solve L_tt X' = A_{t+1,t}'
                let a_sub = &self.sub[t];
                let b = a_sub.rows();
                let mut c = Mat::zeros(b, b);
                let mut row = vec![T::zero(); b];
                for i in 0..b {
                    row.copy_from_slice(a_sub.row(i));
                    ch.solve_lower_in_place(&mut row);
                    c.row_mut(i).copy_from_slice(&row);
                }
                sub.push(c);
            }
            diag.push(ch);
        }
        Ok(BlockTridiagCholesky { diag, sub })
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Block lower-bidiagonal Cholesky factor of a [`BlockTridiag`].
#[derive(Clone, Debug)]
pub struct BlockTridiagCholesky<T> {
    diag: Vec<Cholesky<T>>,
    sub: Vec<Mat<T>>,
}

impl<T: Real> BlockTridiagCholesky<T> {
    fn block_size(&self) -> usize {
        self.diag.first().map_or(0, Cholesky::dim)
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, x: &mut [T]) {
        let b = self.block_size();
        for t in 0..self.diag.len() {
            if t > 0 {
                let (prev, cur) = x.split_at_mut(t * b);
                let prev = &prev[(t - 1) * b..];
                let c = &self.sub[t - 1];
                for i in 0..b {
                    cur[i] -= dot(c.row(i), prev);
                }
            }
            self.diag[t].solve_lower_in_place(&mut x[t * b..(t + 1) * b]);
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, x: &mut [T]) {
        let b = self.block_size();
        let n = self.diag.len();
        for t in (0..n).rev() {
            if t + 1 < n {
                let (cur, next) = x.split_at_mut((t + 1) * b);
                let next = &next[..b];
                let cur = &mut cur[t * b..];
                let c = &self.sub[t];
                for (j, &nj) in next.iter().enumerate() {
                    let crow = c.row(j);
                    for i in 0..b {
                        cur[i] -= crow[i] * nj;
                    }
                }
            }
            self.diag[t].solve_upper_in_place(&mut x[t * b..(t + 1) * b]);
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> T {
        self.diag.iter().map(Cholesky::log_det).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> Mat<f64> {
        // deterministic pseudo-random SPD matrix
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| next());
        a.matmul(&a.transpose()).add(&Mat::scaled_identity(n, n as f64 * 0.1))
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd(6, 3);
        let ch = a.cholesky().unwrap();
        let l = ch.factor();
        assert!(l.matmul(&l.transpose()).max_abs_diff(&a) < 1e-12);
        let x = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let b = a.matvec(&x);
        let y = ch.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(a.matmul(&ch.inverse()).max_abs_diff(&Mat::identity(6)) < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::<f64>::from_f64_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn block_tridiag_matches_dense() {
        let b = 2;
        let n = 4;
        let dense_src = spd(b * n, 11);
        // keep only the block-tridiagonal band, then make it dominant
        let mut bt = BlockTridiag::zeros(n, b);
        for t in 0..n {
            bt.diag[t] = Mat::from_fn(b, b, |i, j| dense_src[(t * b + i, t * b + j)]);
            if t + 1 < n {
                bt.sub[t] = Mat::from_fn(b, b, |i, j| 0.3 * dense_src[((t + 1) * b + i, t * b + j)]);
            }
        }
        bt.add_diagonal(&vec![2.0; b * n]);
        let dense = bt.to_dense();
        assert!(dense.is_symmetric(0.0));
        let x: Vec<f64> = (0..b * n).map(|i| (i as f64).sin()).collect();
        let y1 = bt.matvec(&x);
        let y2 = dense.matvec(&x);
        for (u, v) in y1.iter().zip(&y2) {
            assert!((u - v).abs() < 1e-12);
        }
        let ch = bt.cholesky().unwrap();
        let s1 = ch.solve(&x);
        let s2 = dense.cholesky().unwrap().solve(&x);
        for (u, v) in s1.iter().zip(&s2) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!((ch.log_det() - dense.cholesky().unwrap().log_det()).abs() < 1e-10);
    }

    #[test]
    fn kron_shape_and_entries() {
        let a = Mat::from_f64_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Mat::<f64>::identity(2);
        let k = a.kron(&b);
        assert_eq!(k.rows(), 4);
        assert_eq!(k[(2, 0)], 3.0);
        assert_eq!(k[(2, 1)], 0.0);
        assert_eq!(k[(3, 3)], 4.0);
    }

    #[test]
    fn works_in_f32() {
        let a = spd(4, 5).cast::<f32>();
        let ch = a.cholesky().unwrap();
        let l = ch.factor();
        assert!(l.matmul(&l.transpose()).max_abs_diff(&a) < 1e-5);
    }
}
