//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! and Householder least squares. Systems here are at most a few hundred
//! unknowns, so nothing is blocked or parallel.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
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
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

/// LU factorisation `PA = LU` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    norm_one: T,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                a.cols()
            )));
        }
        let norm_one = a.norm_one();
        let mut lu = a;
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = T::epsilon() * norm_one * T::from_usize_lossy(n.max(1));
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu.get(i, k).abs()))
                    .fold(
                        (k, T::zero()),
                        |best, c| if c.1 > best.1 { c } else { best },
                    );
            if pivot <= tiny || !pivot.is_finite() {
                return Err(Error::Singular {
                    context: format!("zero pivot at column {k} of {n}"),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
            }
            let d = lu.get(k, k);
            for i in k + 1..n {
                let f = lu.get(i, k) / d;
                lu.set(i, k, f);
                if f != T::zero() {
                    for j in k + 1..n {
                        let v = lu.get(k, j);
                        lu.add_to(i, j, -f * v);
                    }
                }
            }
        }
        Ok(Self { lu, perm, norm_one })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: T = (0..i).map(|j| self.lu.get(i, j) * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: T = (i + 1..n).map(|j| self.lu.get(i, j) * x[j]).sum();
            x[i] = (x[i] - s) / self.lu.get(i, i);
        }
        x
    }

    /// 1-norm condition number from an explicit inverse; fine at these sizes.
    pub fn condition_estimate(&self) -> T {
        let n = self.dim();
        let mut inv_norm = T::zero();
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            let s: T = col.iter().map(|v| v.abs()).sum();
            inv_norm = inv_norm.max(s);
        }
        inv_norm * self.norm_one
    }
}

/// Dense solve of `A x = b`.
pub fn solve<T: Real>(a: Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    Ok(Lu::factor(a)?.solve(b))
}

/// Linear least squares `min ‖A x − b‖₂` by Householder QR.
/// Returns the coefficients and the residual 2-norm.
pub fn least_squares<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<(Vec<T>, T)> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::Dimension(format!(
            "least squares needs at least as many rows ({m}) as unknowns ({n})"
        )));
    }
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let scale = r.norm_one().max(T::min_positive_value());
    for k in 0..n {
        let norm: T = (k..m).map(|i| r.get(i, k).powi(2)).sum::<T>().sqrt();
        if norm <= T::epsilon() * scale * T::lit(16.0) {
            return Err(Error::Singular {
                context: format!("rank-deficient design matrix (column {k})"),
            });
        }
        let alpha = if r.get(k, k) > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r.get(i, k)).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        for j in k..n {
            let d: T = (k..m).map(|i| v[i - k] * r.get(i, j)).sum();
            let f = T::lit(2.0) * d / vnorm2;
            for i in k..m {
                r.add_to(i, j, -f * v[i - k]);
            }
        }
        let d: T = (k..m).map(|i| v[i - k] * qtb[i]).sum();
        let f = T::lit(2.0) * d / vnorm2;
        for i in k..m {
            qtb[i] -= f * v[i - k];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s: T = (i + 1..n).map(|j| r.get(i, j) * x[j]).sum();
        x[i] = (qtb[i] - s) / r.get(i, i);
    }
    let residual = qtb[n..].iter().map(|v| *v * *v).sum::<T>().sqrt();
    Ok((x, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lu_solves_pivoting_system() {
        let a = Matrix::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![2.0, 0.0, 3.0f64],
        ]);
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let got = solve(a, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert_relative_eq!(g, w, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0f64]]);
        assert!(matches!(Lu::factor(a), Err(Error::Singular { .. })));
    }

    #[test]
    fn condition_of_identity_is_one() {
        let mut a = Matrix::<f64>::zeros(4, 4);
        (0..4).for_each(|i| a.set(i, i, 1.0));
        assert_relative_eq!(Lu::factor(a).unwrap().condition_estimate(), 1.0);
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0f64];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0 / x, x.ln(), 1.0]).collect();
        let b: Vec<f64> = xs.iter().map(|&x| 2.0 / x - 0.5 * x.ln() + 3.0).collect();
        let (c, res) = least_squares(&Matrix::from_rows(&rows), &b).unwrap();
        assert_relative_eq!(c[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], -0.5, epsilon = 1e-12);
        assert_relative_eq!(c[2], 3.0, epsilon = 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0f64]];
        let r = least_squares(&Matrix::from_rows(&rows), &[1.0, 2.0, 3.0]);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }
}
