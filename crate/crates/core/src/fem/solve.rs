//! Front end for the sparse linear solvers.

use crate::error::{Error, Result};
use crate::linalg::{norm2, pcg, CgOptions, CsrMatrix, SparseLu};

pub const LU_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    SparseLu,
    Cg,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolverSpec {
    pub method: SolverMethod,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for LinearSolverSpec {
    fn default() -> Self {
        Self { method: SolverMethod::SparseLu, rel_tol: 1e-11, max_iter: 20_000 }
    }
}

impl LinearSolverSpec {
    pub fn cg() -> Self {
        Self { method: SolverMethod::Cg, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-6) {
            return Err(Error::Config(format!("solver rel_tol {} outside (0, 1e-6]", self.rel_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

fn residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = a.matvec(x).iter().zip(b).map(|(p, q)| p - q).collect();
    let bn = norm2(b);
    if bn > 0.0 {
        norm2(&r) / bn
    } else {
        norm2(&r)
    }
}

/// Solves `A x = b`, returning `x` and the achieved relative residual.
pub fn solve_linear(a: &CsrMatrix<f64>, b: &[f64], spec: &LinearSolverSpec) -> Result<(Vec<f64>, f64)> {
    spec.validate()?;
    match spec.method {
        SolverMethod::SparseLu => {
            let x = SparseLu::new(a)?.solve(b)?;
            let res = residual(a, &x, b);
            if !(res <= LU_RESIDUAL_TOL) {
                return Err(Error::SingularMatrix(format!("LU residual {res:.3e} above {LU_RESIDUAL_TOL:e}")));
            }
            Ok((x, res))
        }
        SolverMethod::Cg => {
            let out = pcg(a, b, CgOptions { rel_tol: spec.rel_tol, max_iter: spec.max_iter })?;
            Ok((out.x, out.rel_residual))
        }
    }
}

/// Factored operator reused across many right-hand sides.
pub struct Factored {
    matrix: CsrMatrix<f64>,
    lu: SparseLu,
}

impl Factored {
    pub fn new(matrix: CsrMatrix<f64>) -> Result<Self> {
        let lu = SparseLu::new(&matrix)?;
        Ok(Self { matrix, lu })
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(b)
    }

    pub fn solve_checked(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
        let x = self.lu.solve(b)?;
        let res = residual(&self.matrix, &x, b);
        if !(res <= tol) {
            return Err(Error::SingularMatrix(format!("residual {res:.3e} above {tol:e}")));
        }
        Ok((x, res))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    #[test]
    fn hand_solvable_2x2() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, 2.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        b.push(1, 1, 2.0);
        let a = b.build();
        for spec in [LinearSolverSpec::default(), LinearSolverSpec::cg()] {
            let (x, _) = solve_linear(&a, &[3.0, 3.0], &spec).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        }
        let id = CsrMatrix::<f64>::identity(3);
        assert_eq!(solve_linear(&id, &[1.0, 2.0, 3.0], &LinearSolverSpec::default()).unwrap().0, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let spec = LinearSolverSpec { rel_tol: 1e-3, ..LinearSolverSpec::cg() };
        assert!(spec.validate().is_err());
    }
}
