//! Dense Cholesky factorization `A = L L^T`.

use super::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Fails when a pivot is not positive relative to `rel_tol * max diag`.
    pub fn new(a: &DenseMatrix<T>, rel_tol: T) -> Result<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let dmax = (0..n).fold(T::zero(), |m, i| m.max(a[(i, i)].abs()));
        let floor = rel_tol * dmax;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) || d <= T::zero() {
                return Err(Error::SingularMatrix(format!(
                    "Cholesky pivot {j} of {n} is {:.3e}",
                    d.to_f64_lossy()
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
        Ok(Self { l })
    }

    pub fn l(&self) -> &DenseMatrix<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// `L^{-1} b`
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = b.to_vec();
        for j in 0..n {
            x[j] /= self.l[(j, j)];
            let xj = x[j];
            let c = self.l.col(j);
            for i in j + 1..n {
                x[i] -= c[i] * xj;
            }
        }
        x
    }

    /// `L^{-T} b`
    pub fn backward(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let c = self.l.col(i);
            let mut s = x[i];
            for k in i + 1..n {
                s -= c[k] * x[k];
            }
            x[i] = s / c[i];
        }
        x
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }

    /// `L^{-1} B` column by column.
    pub fn forward_matrix(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        let cols: Vec<Vec<T>> = b.columns().map(|c| self.forward(c)).collect();
        DenseMatrix::from_columns(self.dim(), &cols)
    }

    pub fn solve_matrix(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        let cols: Vec<Vec<T>> = b.columns().map(|c| self.solve(c)).collect();
        DenseMatrix::from_columns(self.dim(), &cols)
    }
}
