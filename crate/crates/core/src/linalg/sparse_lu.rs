//! Sparse direct solver backed by faer's supernodal LU.
//!
//! The CSR arrays of `A` are exactly the CSC arrays of `A^T`, so `A^T` is factored
//! and solves go through the transposed solve.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::MatMut;

use super::dense::norm2;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Symbolic analysis of a fixed sparsity pattern, reusable across refactorizations.
#[derive(Clone, Debug)]
pub struct SparseLuPattern {
    n: usize,
    structure: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLu<usize>,
}

#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLuPattern {
    pub fn analyze(a: &CsrMatrix<f64>) -> Result<Self> {
        static SEQUENTIAL: std::sync::Once = std::sync::Once::new();
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::InvalidSpec(format!("sparse LU of a {}x{} matrix", n, a.cols())));
        }
        let structure =
            SymbolicSparseColMat::new_checked(n, n, a.row_ptr().to_vec(), None, a.col_idx().to_vec());
        let symbolic = SymbolicLu::try_new(structure.as_ref())
            .map_err(|e| Error::SingularMatrix(format!("symbolic LU failed: {e:?}")))?;
        Ok(Self { n, structure, symbolic })
    }

    pub fn matches(&self, a: &CsrMatrix<f64>) -> bool {
        a.rows() == self.n
            && a.row_ptr() == self.structure.col_ptr()
            && a.col_idx() == self.structure.row_idx()
    }

    pub fn factor(&self, a: &CsrMatrix<f64>) -> Result<SparseLu> {
        debug_assert!(self.matches(a));
        self.factor_values(a.vals())
    }

    /// Factors new values laid out on the analyzed pattern.
    pub fn factor_values(&self, vals: &[f64]) -> Result<SparseLu> {
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("non-finite matrix entry".into()));
        }
        let mat = SparseColMatRef::new(self.structure.as_ref(), vals);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| Error::SingularMatrix(format!("numeric LU failed: {e:?}")))?;
        Ok(SparseLu { n: self.n, lu })
    }
}

impl SparseLu {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        SparseLuPattern::analyze(a)?.factor(a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        let n = self.n;
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        self.lu.solve_transpose_in_place(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("sparse solve produced non-finite values".into()));
        }
        Ok(())
    }

    /// Solves and checks `||A x - b|| <= tol ||b||`.
    pub fn solve_checked(&self, a: &CsrMatrix<f64>, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let x = self.solve(b)?;
        let r = a.matvec(&x);
        let res: Vec<f64> = r.iter().zip(b).map(|(p, q)| p - q).collect();
        let bn = norm2(b);
        let rel = if bn > 0.0 { norm2(&res) / bn } else { norm2(&res) };
        if !(rel <= tol) {
            return Err(Error::SingularMatrix(format!("sparse solve residual {rel:.3e}")));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;

    #[test]
    fn solves_nonsymmetric_and_refactors() {
        let n = 30;
        let build = |shift: f64| {
            let mut b = TripletBuilder::new(n, n);
            for i in 0..n {
                b.push(i, i, 4.0 + shift);
                if i + 1 < n {
                    b.push(i, i + 1, -1.0);
                    b.push(i + 1, i, -2.0);
                }
                if i + 5 < n {
                    b.push(i, i + 5, 0.5);
                }
            }
            b.build()
        };
        let a = build(0.0);
        let pat = SparseLuPattern::analyze(&a).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        for shift in [0.0, 1.0, 2.5] {
            let a = build(shift);
            assert!(pat.matches(&a));
            let lu = pat.factor(&a).unwrap();
            lu.solve_checked(&a, &rhs, 1e-12).unwrap();
        }
    }
}
