//! The Taylor–Hood saddle-point system of one backward-Euler step.
//!
//! ```text
//! [ a M + N(w) + nu S   -B^T   0 ] [u]   [r_u]
//! [ B                     0    e ] [p] = [ 0 ]
//! [ 0                    e^T   0 ] [l]   [ 0 ]
//! ```
//! with `e = M_p 1` fixing the pressure mean and homogeneous Dirichlet rows eliminated
//! symmetrically. The pattern is fixed, so values are refreshed in place and the
//! symbolic factorization is reused.

use super::assembly::{AssembledOperators, ConvectionAssembler};
use super::dirichlet::Constraint;
use super::space::FeSpace;
use crate::error::Result;
use crate::linalg::{norm2, CsrMatrix, SparseLu, SparseLuPattern, TripletBuilder};

const SKIP: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub multiplier: f64,
    pub residual: f64,
}

pub struct SaddleSystem {
    n_u: usize,
    n_p: usize,
    structure: CsrMatrix<f64>,
    static_vals: Vec<f64>,
    conv_pos: Vec<usize>,
    lu_pattern: SparseLuPattern,
    constraint: Constraint,
}

impl SaddleSystem {
    /// `mass_coeff` is `1/dt` for a time step and `0` for a steady Stokes solve.
    pub fn new(
        vh: &FeSpace,
        qh: &FeSpace,
        ops: &AssembledOperators,
        conv: &ConvectionAssembler,
        nu: f64,
        mass_coeff: f64,
        constraint: Constraint,
    ) -> Result<Self> {
        let n_u = vh.dof_count();
        let n_p = qh.dof_count();
        let ns = vh.scalar_count();
        let dim = n_u + n_p + 1;
        let lam = n_u + n_p;
        let cpat = conv.pattern().pattern();

        let mut tb = TripletBuilder::new(dim, dim);
        for c in 0..2 {
            for i in 0..ns {
                let (cols, _) = cpat.row(i);
                for &j in cols {
                    tb.push(c * ns + i, c * ns + j, 0.0);
                }
            }
        }
        for q in 0..n_p {
            let (cols, _) = ops.b.row(q);
            for &j in cols {
                tb.push(n_u + q, j, 0.0);
                tb.push(j, n_u + q, 0.0);
            }
            tb.push(n_u + q, lam, 0.0);
            tb.push(lam, n_u + q, 0.0);
        }
        tb.push(lam, lam, 0.0);
        let structure = tb.build();

        let mut vals = vec![0.0; structure.nnz()];
        let mut add = |i: usize, j: usize, v: f64| {
            let k = structure.position(i, j).expect("entry in saddle pattern");
            vals[k] += v;
        };
        let fixed = |d: usize| d < n_u && constraint.is_constrained(d);
        for (block, scale) in [(&ops.m_u, mass_coeff), (&ops.s_u, nu)] {
            for i in 0..n_u {
                if fixed(i) {
                    continue;
                }
                let (cols, v) = block.row(i);
                for (&j, &a) in cols.iter().zip(v) {
                    if !fixed(j) {
                        add(i, j, scale * a);
                    }
                }
            }
        }
        for q in 0..n_p {
            let (cols, v) = ops.b.row(q);
            for (&j, &a) in cols.iter().zip(v) {
                if !fixed(j) {
                    add(n_u + q, j, a);
                    add(j, n_u + q, -a);
                }
            }
            add(n_u + q, lam, ops.mean[q]);
            add(lam, n_u + q, ops.mean[q]);
        }
        for &d in constraint.dofs() {
            add(d, d, 1.0);
        }

        let mut conv_pos = Vec::with_capacity(2 * cpat.nnz());
        for c in 0..2 {
            for i in 0..ns {
                let (cols, _) = cpat.row(i);
                for &j in cols {
                    let (gi, gj) = (c * ns + i, c * ns + j);
                    conv_pos.push(if fixed(gi) || fixed(gj) { SKIP } else { structure.position(gi, gj).unwrap() });
                }
            }
        }
        let lu_pattern = SparseLuPattern::analyze(&structure)?;
        Ok(Self { n_u, n_p, structure, static_vals: vals, conv_pos, lu_pattern, constraint })
    }

    pub fn dim(&self) -> usize {
        self.n_u + self.n_p + 1
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    /// Matrix values with the scalar convection block `conv_block` (on the convection pattern) added.
    pub fn values(&self, conv_block: Option<&CsrMatrix<f64>>) -> Vec<f64> {
        let mut vals = self.static_vals.clone();
        if let Some(cb) = conv_block {
            let cv = cb.vals();
            let nnz = cv.len();
            for c in 0..2 {
                for (k, &v) in cv.iter().enumerate() {
                    let pos = self.conv_pos[c * nnz + k];
                    if pos != SKIP {
                        vals[pos] += v;
                    }
                }
            }
        }
        vals
    }

    pub fn matrix(&self, conv_block: Option<&CsrMatrix<f64>>) -> CsrMatrix<f64> {
        let mut m = self.structure.clone();
        m.vals_mut().copy_from_slice(&self.values(conv_block));
        m
    }

    pub fn factor(&self, conv_block: Option<&CsrMatrix<f64>>) -> Result<(CsrMatrix<f64>, SparseLu)> {
        let m = self.matrix(conv_block);
        let lu = self.lu_pattern.factor(&m)?;
        Ok((m, lu))
    }

    pub fn factor_matrix(&self, m: &CsrMatrix<f64>) -> Result<SparseLu> {
        self.lu_pattern.factor(m)
    }

    fn full_rhs(&self, rhs_u: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.dim()];
        rhs[..self.n_u].copy_from_slice(rhs_u);
        self.constraint.zero(&mut rhs[..self.n_u]);
        rhs
    }

    fn split(&self, x: Vec<f64>, residual: f64) -> SaddleSolution {
        SaddleSolution {
            u: x[..self.n_u].to_vec(),
            p: x[self.n_u..self.n_u + self.n_p].to_vec(),
            multiplier: x[self.n_u + self.n_p],
            residual,
        }
    }

    /// Solves with momentum right-hand side `rhs_u` (constrained entries are replaced by zero).
    pub fn solve(&self, matrix: &CsrMatrix<f64>, lu: &SparseLu, rhs_u: &[f64]) -> Result<SaddleSolution> {
        let rhs = self.full_rhs(rhs_u);
        let x = lu.solve(&rhs)?;
        let residual = relative_residual(matrix, &x, &rhs);
        Ok(self.split(x, residual))
    }

    /// Defect correction `x += LU^{-1}(b - A x)` with `lu` factoring a nearby matrix.
    /// Returns `None` when `max_iter` corrections do not reach `tol`.
    pub fn solve_refined(
        &self,
        matrix: &CsrMatrix<f64>,
        lu: &SparseLu,
        rhs_u: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<Option<SaddleSolution>> {
        let rhs = self.full_rhs(rhs_u);
        let bn = norm2(&rhs);
        let mut x = vec![0.0; rhs.len()];
        let mut r = rhs.clone();
        for _ in 0..max_iter {
            let dx = lu.solve(&r)?;
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            matrix.matvec_into(&x, &mut r);
            r.iter_mut().zip(&rhs).for_each(|(a, b)| *a = b - *a);
            let res = if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) };
            if res <= tol {
                return Ok(Some(self.split(x, res)));
            }
        }
        Ok(None)
    }
}

fn relative_residual(matrix: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = matrix.matvec(x).iter().zip(b).map(|(a, b)| a - b).collect();
    let bn = norm2(b);
    if bn > 0.0 {
        norm2(&r) / bn
    } else {
        norm2(&r)
    }
}
