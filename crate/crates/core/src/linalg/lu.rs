//! Dense LU with partial pivoting.

use super::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct DenseLu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    /// Factors `a`. A pivot below `n * eps * max|a|` is reported as singular.
    pub fn new(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols(), "LU of a non-square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = T::lit(n.max(1) as f64) * T::epsilon() * a.max_abs();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularMatrix(format!(
                    "pivot {k} of {n} is {:.3e}",
                    best.to_f64_lossy()
                )));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= piv;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == T::zero() {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != T::zero() {
                let c = self.lu.col(j);
                for i in j + 1..n {
                    x[i] -= c[i] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let c = self.lu.col(j);
            x[j] /= c[j];
            let xj = x[j];
            for i in 0..j {
                x[i] -= c[i] * xj;
            }
        }
        x
    }

    pub fn solve_matrix(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        let cols: Vec<Vec<T>> = b.columns().map(|c| self.solve(c)).collect();
        DenseMatrix::from_columns(self.dim(), &cols)
    }

    pub fn determinant(&self) -> T {
        let n = self.dim();
        let mut d = T::one();
        for i in 0..n {
            d *= self.lu[(i, i)];
        }
        // parity of the permutation
        let mut seen = vec![false; n];
        let mut swaps = 0usize;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut len = 0;
            let mut k = s;
            while !seen[k] {
                seen[k] = true;
                k = self.perm[k];
                len += 1;
            }
            swaps += len - 1;
        }
        if swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }

    /// Cheap lower bound estimate of the 1-norm condition number.
    pub fn rcond_estimate(&self, a_norm1: T) -> T {
        let n = self.dim();
        if n == 0 {
            return T::one();
        }
        let mut best = T::zero();
        for seed in 0..3 {
            let b: Vec<T> = (0..n)
                .map(|i| if (i + seed) % 2 == 0 { T::one() } else { -T::one() })
                .collect();
            let x = self.solve(&b);
            let xn: T = x.iter().map(|v| v.abs()).sum();
            best = best.max(xn / T::lit(n as f64));
        }
        T::one() / (a_norm1 * best)
    }
}

pub fn norm1<T: Real>(a: &DenseMatrix<T>) -> T {
    a.columns()
        .map(|c| c.iter().map(|v| v.abs()).sum::<T>())
        .fold(T::zero(), |m, v| m.max(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        let a = DenseMatrix::<f64>::from_fn(3, 3, |i, j| [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]][i][j]);
        let lu = DenseLu::new(&a).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([3.0_f64, 2.0, 4.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        assert!((lu.determinant() - (-5.0_f64)).abs() < 1e-13);
    }

    #[test]
    fn rejects_singular() {
        let a = DenseMatrix::from_fn(2, 2, |i, _| i as f64 + 1.0);
        assert!(matches!(DenseLu::new(&a), Err(Error::SingularMatrix(_))));
    }
}
