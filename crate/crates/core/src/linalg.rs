//! Small dense and banded solvers used by the depolymerisation inverse problem.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, &v) in c.iter().enumerate() {
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v`
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    /// `Aᵀ diag(w) A`
    pub fn weighted_gram(&self, w: &[T]) -> Matrix<T> {
        assert_eq!(w.len(), self.rows);
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for (k, &wk) in w.iter().enumerate() {
            let r = self.row(k);
            for i in 0..n {
                let ri = r[i] * wk;
                if ri == T::zero() {
                    continue;
                }
                let gi = &mut g.data[i * n..(i + 1) * n];
                for j in i..n {
                    gi[j] = gi[j] + ri * r[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }

    pub fn scaled(mut self, c: T) -> Self {
        self.data.iter_mut().for_each(|v| *v = *v * c);
        self
    }

    pub fn add(mut self, other: &Matrix<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a = *a + b);
        self
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Cholesky factor `L` (lower, row-major) of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::invalid("Cholesky needs a square matrix"));
        }
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Singular(format!("pivot {j} is {d}")));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let s = a[(i, j)] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &y[..i]);
            y[i] = (y[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut beta = diag[0];
    if beta == T::zero() {
        return Err(Error::Singular("tridiagonal pivot 0".into()));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == T::zero() || !beta.is_finite() {
            return Err(Error::Singular(format!("tridiagonal pivot {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { T::zero() };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Ok(d)
}

/// Symmetric positive definite band matrix with `bw` sub-diagonals, stored
/// as `band[i][d] = A[i][i-d]`.
#[derive(Debug, Clone)]
pub struct BandedSpd<T> {
    n: usize,
    bw: usize,
    band: Vec<T>,
}

impl<T: Real> BandedSpd<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, band: vec![T::zero(); n * (bw + 1)] }
    }

    /// Adds `v` at `(i, j)` with `|i - j| ≤ bw`; symmetric counterpart implied.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        assert!(d <= self.bw);
        let k = i * (self.bw + 1) + d;
        self.band[k] = self.band[k] + v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        if d > self.bw {
            T::zero()
        } else {
            self.band[i * (self.bw + 1) + d]
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        // banded Cholesky: l[i][d] = L[i][i-d]
        let mut l = vec![T::zero(); n * w];
        for i in 0..n {
            for d in (0..=bw.min(i)).rev() {
                let j = i - d;
                let mut s = self.band[i * w + d];
                for k in 1..=bw {
                    // L[i][j-k] * L[j][j-k]
                    if k > j || d + k > bw {
                        break;
                    }
                    s = s - l[i * w + d + k] * l[j * w + k];
                }
                if d == 0 {
                    if !(s > T::zero()) {
                        return Err(Error::Singular(format!("band pivot {i} is {s}")));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + d] = s / l[j * w];
                }
            }
        }
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for d in 1..=bw.min(i) {
                s = s - l[i * w + d] * y[i - d];
            }
            y[i] = s / l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for d in 1..=bw {
                if i + d >= n {
                    break;
                }
                s = s - l[(i + d) * w + d] * y[i + d];
            }
            y[i] = s / l[i * w];
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix<f64> {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
            }
            a[(i, i)] += n as f64;
        }
        a
    }

    #[test]
    fn cholesky_solves() {
        let a = spd(6);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let b = a.mul_vec(&x);
        let got = Cholesky::new(&a).unwrap().solve(&b);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Matrix::<f64>::identity(3);
        a[(1, 1)] = -1.0;
        assert!(matches!(Cholesky::new(&a), Err(Error::Singular(_))));
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let n = 5;
        let lower: Vec<f64> = vec![0.0, -1.0, -1.0, -1.0, -1.0];
        let diag = vec![4.0; n];
        let upper = vec![-1.0, -1.0, -1.0, -1.0, 0.0];
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                b[i] += upper[i] * x[i + 1];
            }
        }
        let got = solve_tridiagonal(&lower, &diag, &upper, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let mut band = BandedSpd::zeros(n, 2);
        let mut dense = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..=i {
                let v = if i == j { 6.0 + i as f64 } else { 1.0 / (1 + i + j) as f64 };
                band.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let b = dense.mul_vec(&x);
        let got = band.solve(&b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }
}
